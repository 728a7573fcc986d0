use crate::error::{Error, Result};
use crate::real::Real;
use crate::rotation::Vec3;

/// `mu0 / 4 pi` in SI units.
pub const MU0_OVER_4PI: f64 = 1e-7;

/// Minimum source-to-query distance in metres.
pub const MIN_DISTANCE: f64 = 1e-6;

/// Flux density (tesla) of a point dipole with `moment` (A m^2) located at
/// `source`, evaluated at `query` (metres):
/// `B = mu0/4pi * (3 (m . r^) r^ - m) / |r|^3`.
pub fn dipole_field<T: Real>(moment: &Vec3<T>, source: &Vec3<T>, query: &Vec3<T>) -> Result<Vec3<T>> {
    let r = [query[0] - source[0], query[1] - source[1], query[2] - source[2]];
    let d2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let d = d2.sqrt();
    if !(d > T::lit(MIN_DISTANCE)) {
        return Err(Error::TooCloseToSource {
            floor: MIN_DISTANCE,
        });
    }
    let rh = [r[0] / d, r[1] / d, r[2] / d];
    let mdotr = moment[0] * rh[0] + moment[1] * rh[1] + moment[2] * rh[2];
    let k = T::lit(MU0_OVER_4PI) / (d2 * d);
    let three = T::lit(3.0);
    Ok([
        k * (three * mdotr * rh[0] - moment[0]),
        k * (three * mdotr * rh[1] - moment[1]),
        k * (three * mdotr * rh[2] - moment[2]),
    ])
}
