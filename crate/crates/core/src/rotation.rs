//! Rotation representations: SO(3) matrices, extrinsic X-Y-Z Euler angles and
//! the continuous 6D encoding (first two matrix columns) decoded by
//! Gram-Schmidt.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::real::Real;

/// Degeneracy threshold for Gram-Schmidt decoding.
pub const SIXD_EPS: f64 = 1e-8;

pub type Mat3<T> = [[T; 3]; 3];
pub type Vec3<T> = [T; 3];

/// A proper rotation matrix, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation<T> {
    m: Mat3<T>,
}

/// Extrinsic X-Y-Z Euler angles in radians: `R = Rz(rz) * Ry(ry) * Rx(rx)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles<T> {
    pub rx: T,
    pub ry: T,
    pub rz: T,
}

/// Continuous 6D rotation encoding: two stacked 3-vectors `(a1, a2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SixD<T>(pub [T; 6]);

impl<T: Real> EulerAngles<T> {
    pub fn new(rx: T, ry: T, rz: T) -> Self {
        Self { rx, ry, rz }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.rx, self.ry, self.rz]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<T: Real> SixD<T> {
    pub fn a1(&self) -> Vec3<T> {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn a2(&self) -> Vec3<T> {
        [self.0[3], self.0[4], self.0[5]]
    }

    pub fn from_slice(v: &[T]) -> Result<Self> {
        let arr: [T; 6] = v.try_into().map_err(|_| Error::DimensionMismatch {
            expected: 6,
            got: v.len(),
        })?;
        Ok(Self(arr))
    }
}

fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale<T: Real>(a: &Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = a % two_pi;
    if w <= -T::PI() {
        w = w + two_pi;
    } else if w > T::PI() {
        w = w - two_pi;
    }
    w
}

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    /// Wraps a matrix without checking the SO(3) invariants.
    pub fn from_matrix_unchecked(m: Mat3<T>) -> Self {
        Self { m }
    }

    /// Builds a rotation from three columns.
    pub fn from_columns(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Self {
            m: [
                [c0[0], c1[0], c2[0]],
                [c0[1], c1[1], c2[1]],
                [c0[2], c1[2], c2[2]],
            ],
        }
    }

    pub fn matrix(&self) -> &Mat3<T> {
        &self.m
    }

    pub fn column(&self, j: usize) -> Vec3<T> {
        [self.m[0][j], self.m[1][j], self.m[2][j]]
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [T; 9] {
        let m = &self.m;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    pub fn from_row_major(v: &[T; 9]) -> Self {
        Self {
            m: [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]],
        }
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Self { m: out }
    }

    pub fn apply(&self, v: &Vec3<T>) -> Vec3<T> {
        [dot(&self.m[0], v), dot(&self.m[1], v), dot(&self.m[2], v)]
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let d = self.m[i][j] - other.m[i][j];
                acc = acc + d * d;
            }
        }
        acc.sqrt()
    }

    /// Checks `m^T m = I` (Frobenius) and `det m = +1` within `tol`.
    pub fn is_valid(&self, tol: T) -> bool {
        let mtm = self.transpose().mul(self);
        let ortho = mtm.frobenius_distance(&Self::identity());
        let det = (self.determinant() - T::one()).abs();
        self.m.iter().flatten().all(|v| v.is_finite()) && ortho <= tol && det <= tol
    }

    pub fn rot_x(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, c, -s], [z, s, c]],
        }
    }

    pub fn rot_y(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[c, z, s], [z, o, z], [-s, z, c]],
        }
    }

    pub fn rot_z(a: T) -> Self {
        let (s, c) = a.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[c, -s, z], [s, c, z], [z, z, o]],
        }
    }

    /// Rotation from a unit quaternion `(w, x, y, z)`.
    pub fn from_quaternion(q: [T; 4]) -> Self {
        let n = q.iter().map(|v| *v * *v).sum::<T>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        let two = T::lit(2.0);
        let o = T::one();
        Self {
            m: [
                [o - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
                [two * (x * y + w * z), o - two * (x * x + z * z), two * (y * z - w * x)],
                [two * (x * z - w * y), two * (y * z + w * x), o - two * (x * x + y * y)],
            ],
        }
    }

    /// Haar-uniform random rotation (normalized 4D Gaussian quaternion).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if q.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
                return Self::from_quaternion(q.map(T::lit));
            }
        }
    }

    /// Rodrigues exponential of a rotation vector.
    pub fn exp(w: &Vec3<T>) -> Self {
        let theta = norm(w);
        let (o, z) = (T::one(), T::zero());
        let k = [[z, -w[2], w[1]], [w[2], z, -w[0]], [-w[1], w[0], z]];
        // coefficients of K and K^2, Taylor-expanded near zero
        let (a, b) = if theta < T::lit(1e-6) {
            let t2 = theta * theta;
            (o - t2 / T::lit(6.0), T::lit(0.5) - t2 / T::lit(24.0))
        } else {
            (theta.sin() / theta, (o - theta.cos()) / (theta * theta))
        };
        let mut m = Self::identity().m;
        for i in 0..3 {
            for j in 0..3 {
                let k2: T = (0..3).map(|l| k[i][l] * k[l][j]).sum();
                m[i][j] = m[i][j] + a * k[i][j] + b * k2;
            }
        }
        Self { m }
    }

    /// Rotation vector (axis times angle) with angle in `[0, pi]`.
    pub fn log(&self) -> Vec3<T> {
        let m = &self.m;
        let theta = geodesic_angle(&Self::identity(), self);
        let skew = [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]];
        if theta < T::lit(1e-6) {
            return scale(&skew, T::lit(0.5));
        }
        if T::PI() - theta > T::lit(1e-6) {
            return scale(&skew, theta / (T::lit(2.0) * theta.sin()));
        }
        // near pi: axis from the symmetric part, largest diagonal first
        let o = T::one();
        let i = (0..3)
            .max_by(|&a, &b| m[a][a].partial_cmp(&m[b][b]).unwrap())
            .unwrap();
        let mut axis = [T::zero(); 3];
        let denom = (T::lit(2.0) * (o + m[i][i])).sqrt();
        for (j, a) in axis.iter_mut().enumerate() {
            *a = if j == i {
                denom / T::lit(2.0)
            } else {
                (m[j][i] + m[i][j]) / (T::lit(2.0) * denom)
            };
        }
        // resolve the sign ambiguity with the (small) skew part
        if dot(&axis, &skew) < T::zero() {
            axis = scale(&axis, -o);
        }
        let n = norm(&axis);
        scale(&axis, theta / n)
    }

    /// Geodesic interpolation: `self * exp(s * log(self^T target))`.
    pub fn slerp(&self, target: &Self, s: T) -> Self {
        let rel = self.transpose().mul(target);
        let w = scale(&rel.log(), s);
        self.mul(&Self::exp(&w))
    }
}

/// `R = Rz(rz) * Ry(ry) * Rx(rx)`.
pub fn euler_to_rotation<T: Real>(e: &EulerAngles<T>) -> Rotation<T> {
    Rotation::rot_z(e.rz)
        .mul(&Rotation::rot_y(e.ry))
        .mul(&Rotation::rot_x(e.rx))
}

/// Inverse of [`euler_to_rotation`]. At gimbal lock (`|ry| = pi/2`) the
/// free angle is carried entirely by `rz` and `rx` is set to zero.
pub fn rotation_to_euler<T: Real>(r: &Rotation<T>) -> EulerAngles<T> {
    let m = r.matrix();
    let o = T::one();
    let sy = (-m[2][0]).max(-o).min(o);
    let ry = sy.asin();
    let cy = (m[2][1] * m[2][1] + m[2][2] * m[2][2]).sqrt();
    let (rx, rz) = if cy > T::lit(1e-12) {
        (m[2][1].atan2(m[2][2]), m[1][0].atan2(m[0][0]))
    } else {
        (T::zero(), (-m[0][1]).atan2(m[1][1]))
    };
    EulerAngles::new(wrap_angle(rx), wrap_angle(ry), wrap_angle(rz))
}

/// First two columns of the matrix.
pub fn rotation_to_sixd<T: Real>(r: &Rotation<T>) -> SixD<T> {
    let c0 = r.column(0);
    let c1 = r.column(1);
    SixD([c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]])
}

struct GramSchmidt<T> {
    a2: Vec3<T>,
    n1: T,
    n2: T,
    b1: Vec3<T>,
    b2: Vec3<T>,
    b3: Vec3<T>,
}

fn gram_schmidt<T: Real>(v: &SixD<T>) -> Result<GramSchmidt<T>> {
    let eps = T::lit(SIXD_EPS);
    let a1 = v.a1();
    let a2 = v.a2();
    let n1 = norm(&a1);
    if !(n1 > eps) {
        return Err(Error::DegenerateSixD);
    }
    let b1 = scale(&a1, T::one() / n1);
    let u = sub(&a2, &scale(&b1, dot(&b1, &a2)));
    let n2 = norm(&u);
    if !(n2 > eps) {
        return Err(Error::DegenerateSixD);
    }
    let b2 = scale(&u, T::one() / n2);
    let b3 = cross(&b1, &b2);
    Ok(GramSchmidt {
        a2,
        n1,
        n2,
        b1,
        b2,
        b3,
    })
}

/// Gram-Schmidt decoding of a 6D vector into a rotation with columns
/// `(b1, b2, b1 x b2)`.
pub fn sixd_to_rotation<T: Real>(v: &SixD<T>) -> Result<Rotation<T>> {
    let gs = gram_schmidt(v)?;
    Ok(Rotation::from_columns(gs.b1, gs.b2, gs.b3))
}

/// Gradient of `<upstream, sixd_to_rotation(v)>` with respect to `v`.
pub fn sixd_to_rotation_grad<T: Real>(v: &SixD<T>, upstream: &Mat3<T>) -> Result<[T; 6]> {
    let gs = gram_schmidt(v)?;
    let g1 = [upstream[0][0], upstream[1][0], upstream[2][0]];
    let g2 = [upstream[0][1], upstream[1][1], upstream[2][1]];
    let g3 = [upstream[0][2], upstream[1][2], upstream[2][2]];

    // b3 = b1 x b2
    let mut gb1 = add(&g1, &cross(&gs.b2, &g3));
    let gb2 = add(&g2, &cross(&g3, &gs.b1));

    // b2 = u / |u|
    let gu = scale(
        &sub(&gb2, &scale(&gs.b2, dot(&gs.b2, &gb2))),
        T::one() / gs.n2,
    );

    // u = a2 - (b1 . a2) b1
    let ga2 = sub(&gu, &scale(&gs.b1, dot(&gs.b1, &gu)));
    let d = dot(&gs.b1, &gs.a2);
    gb1 = sub(
        &gb1,
        &add(&scale(&gs.a2, dot(&gs.b1, &gu)), &scale(&gu, d)),
    );

    // b1 = a1 / |a1|
    let ga1 = scale(
        &sub(&gb1, &scale(&gs.b1, dot(&gs.b1, &gb1))),
        T::one() / gs.n1,
    );
    Ok([ga1[0], ga1[1], ga1[2], ga2[0], ga2[1], ga2[2]])
}

/// Per-axis Euler angle difference `pred - truth`, each wrapped to `(-pi, pi]`.
pub fn euler_error<T: Real>(pred: &Rotation<T>, truth: &Rotation<T>) -> [T; 3] {
    let p = rotation_to_euler(pred).to_array();
    let t = rotation_to_euler(truth).to_array();
    std::array::from_fn(|k| wrap_angle(p[k] - t[k]))
}

/// Angle of the relative rotation `r1^T r2`, in `[0, pi]`.
///
/// Computed as `atan2(sin, cos)` from the skew and trace parts, which stays
/// accurate near 0 and pi where `acos` of the trace loses precision.
pub fn geodesic_angle<T: Real>(r1: &Rotation<T>, r2: &Rotation<T>) -> T {
    let rel = r1.transpose().mul(r2);
    let m = rel.matrix();
    let skew = [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]];
    let two = T::lit(2.0);
    let sin = norm(&skew) / two;
    let cos = (rel.trace() - T::one()) / two;
    sin.atan2(cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type R = Rotation<f64>;

    fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    #[test]
    fn euler_identity_and_quarter_turn() {
        let r = euler_to_rotation(&EulerAngles::new(0.0, 0.0, 0.0));
        assert!(r.frobenius_distance(&R::identity()) < 1e-15);

        let r = euler_to_rotation(&EulerAngles::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0));
        let y = r.apply(&[0.0, 1.0, 0.0]);
        let z = r.apply(&[0.0, 0.0, 1.0]);
        assert!(sub(&y, &[0.0, 0.0, 1.0]).iter().all(|v| v.abs() < 1e-15));
        assert!(sub(&z, &[0.0, -1.0, 0.0]).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn euler_matches_explicit_axis_products() {
        let (x, y, z) = (0.3f64, -0.7f64, 1.1f64);
        let rx = [[1.0, 0.0, 0.0], [0.0, x.cos(), -x.sin()], [0.0, x.sin(), x.cos()]];
        let ry = [[y.cos(), 0.0, y.sin()], [0.0, 1.0, 0.0], [-y.sin(), 0.0, y.cos()]];
        let rz = [[z.cos(), -z.sin(), 0.0], [z.sin(), z.cos(), 0.0], [0.0, 0.0, 1.0]];
        let expected = R::from_matrix_unchecked(matmul(&matmul(&rz, &ry), &rx));
        let r = euler_to_rotation(&EulerAngles::new(x, y, z));
        assert!(r.frobenius_distance(&expected) < 1e-14);
        assert!(r.is_valid(1e-9));
    }

    #[test]
    fn euler_round_trip() {
        let e = EulerAngles::new(0.3f64, -0.7, 1.1);
        let back = rotation_to_euler(&euler_to_rotation(&e));
        assert!((back.rx - 0.3).abs() < 1e-9);
        assert!((back.ry + 0.7).abs() < 1e-9);
        assert!((back.rz - 1.1).abs() < 1e-9);
        let id = rotation_to_euler(&R::identity());
        assert_eq!(id.to_array(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn euler_gimbal_lock() {
        // ry = pi/2 with rx = 0.4, rz = 0.9 collapses to rz - rx
        let half_pi = std::f64::consts::FRAC_PI_2;
        let (s, c) = (0.5f64).sin_cos();
        let m = [[0.0, -s, c], [0.0, c, s], [-1.0, 0.0, 0.0]];
        let r = R::from_matrix_unchecked(m);
        assert!(r.is_valid(1e-12));
        let composed = euler_to_rotation(&EulerAngles::new(0.4, half_pi, 0.9));
        assert!(composed.frobenius_distance(&r) < 1e-12);

        let e = rotation_to_euler(&r);
        assert_eq!(e.rx, 0.0);
        assert!((e.ry - half_pi).abs() < 1e-12);
        assert!(euler_to_rotation(&e).frobenius_distance(&r) < 1e-9);
    }

    #[test]
    fn euler_range_is_half_open() {
        let r = R::rot_z(std::f64::consts::PI);
        let e = rotation_to_euler(&r);
        assert!(e.rz > 0.0);
        assert_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
    }

    #[test]
    fn sixd_encoding_examples() {
        assert_eq!(
            rotation_to_sixd(&R::identity()).0,
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
        let v = rotation_to_sixd(&R::rot_z(std::f64::consts::FRAC_PI_2)).0;
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sixd_encoding_extracts_first_two_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r: R = Rotation::random(&mut rng);
            let v = rotation_to_sixd(&r);
            let m = r.matrix();
            assert_eq!(v.0, [m[0][0], m[1][0], m[2][0], m[0][1], m[1][1], m[2][1]]);
        }
    }

    #[test]
    fn sixd_decoding_examples() {
        let r = sixd_to_rotation(&SixD([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(r.frobenius_distance(&R::identity()) < 1e-15);
        let r = sixd_to_rotation(&SixD([2.0, 0.0, 0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!(r.frobenius_distance(&R::identity()) < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = sixd_to_rotation(&SixD([1.0, 1.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        let expected = R::from_columns([h, h, 0.0], [0.0, 0.0, 1.0], [h, -h, 0.0]);
        assert!(r.frobenius_distance(&expected) < 1e-15);
    }

    #[test]
    fn sixd_degenerate_inputs() {
        assert_eq!(
            sixd_to_rotation(&SixD([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])),
            Err(Error::DegenerateSixD)
        );
        assert_eq!(
            sixd_to_rotation(&SixD([1.0, 0.0, 0.0, 3.0, 0.0, 0.0])),
            Err(Error::DegenerateSixD)
        );
        let up = [[1.0; 3]; 3];
        assert!(sixd_to_rotation_grad(&SixD([0.0; 6]), &up).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let g = sixd_to_rotation_grad(&SixD([0.3, 1.0, -0.2, 0.5, 0.1, 0.9]), &[[0.0; 3]; 3]).unwrap();
        assert_eq!(g, [0.0; 6]);
    }

    #[test]
    fn gradient_is_blind_to_scaling_a1() {
        let v = rotation_to_sixd(&R::identity());
        let up = *R::identity().matrix();
        let g = sixd_to_rotation_grad(&v, &up).unwrap();
        let along = g[0] * v.0[0] + g[1] * v.0[1] + g[2] * v.0[2];
        assert!(along.abs() < 1e-15);
    }

    #[test]
    fn geodesic_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r: R = Rotation::random(&mut rng);
        assert!(geodesic_angle(&r, &r) < 1e-7);
        let a = geodesic_angle(&R::identity(), &R::rot_z(std::f64::consts::FRAC_PI_2));
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r: R = Rotation::random(&mut rng);
            let back = R::exp(&r.log());
            assert!(back.frobenius_distance(&r) < 1e-9, "{r:?}");
        }
        let near_pi = R::rot_x(std::f64::consts::PI - 1e-9).mul(&R::rot_y(1e-8));
        assert!(R::exp(&near_pi.log()).frobenius_distance(&near_pi) < 1e-7);
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = R::rot_z(0.2);
        let b = R::rot_z(1.0);
        assert!(a.slerp(&b, 0.0).frobenius_distance(&a) < 1e-12);
        assert!(a.slerp(&b, 1.0).frobenius_distance(&b) < 1e-12);
        assert!(a.slerp(&b, 0.5).frobenius_distance(&R::rot_z(0.6)) < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let e = EulerAngles::new(0.3f32, -0.7, 1.1);
        let r = euler_to_rotation(&e);
        assert!(r.is_valid(1e-5));
        let back = sixd_to_rotation(&rotation_to_sixd(&r)).unwrap();
        assert!(back.frobenius_distance(&r) < 1e-5);
    }
}
