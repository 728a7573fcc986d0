use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kv::{format_f64_list, KvDoc};
use crate::rotation::{euler_to_rotation, rotation_to_euler};
use crate::{EulerAngles, Rotation};

/// Per-axis joint range in radians (extrinsic X-Y-Z Euler angles).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for JointLimits {
    /// Range reached by the shoulder joint in the reference trajectory.
    fn default() -> Self {
        Self {
            min: [-1.418, -1.457, -2.036],
            max: [0.647, -0.0288, 0.061],
        }
    }
}

impl JointLimits {
    pub fn validate(&self) -> Result<()> {
        if (0..3).all(|k| self.min[k] < self.max[k]) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("joint limits need min < max on every axis".into()))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EulerAngles {
        let v: [f64; 3] = std::array::from_fn(|k| rng.gen_range(self.min[k]..self.max[k]));
        EulerAngles::from_array(v)
    }

    pub fn clamp(&self, e: &EulerAngles) -> EulerAngles {
        let v = e.to_array();
        EulerAngles::from_array(std::array::from_fn(|k| v[k].clamp(self.min[k], self.max[k])))
    }

    pub fn contains(&self, e: &EulerAngles) -> bool {
        let v = e.to_array();
        (0..3).all(|k| v[k] >= self.min[k] && v[k] <= self.max[k])
    }

    pub fn to_kv(&self, doc: &mut KvDoc) {
        doc.set("limits.min", format_f64_list(&self.min));
        doc.set("limits.max", format_f64_list(&self.max));
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let triple = |key: &str| -> Result<[f64; 3]> {
            let v = doc.parse_list(key)?;
            v.try_into()
                .map_err(|_| Error::Format(format!("{key} needs 3 values")))
        };
        let limits = Self {
            min: triple("limits.min")?,
            max: triple("limits.max")?,
        };
        limits.validate()?;
        Ok(limits)
    }
}

/// Motion model for [`random_walk_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    /// Maximum per-axis change of the Euler target per step (radians).
    pub rate: f64,
    /// Slerp factor of the first-order lag between target and actual pose.
    pub lag: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            rate: 0.01,
            lag: 0.2,
        }
    }
}

/// Random-walk trajectory with the default motion model.
pub fn random_walk(limits: &JointLimits, n_steps: usize, seed: u64) -> Vec<(EulerAngles, Rotation)> {
    random_walk_with(limits, n_steps, seed, &WalkConfig::default())
}

/// Repeatedly picks a uniform goal inside `limits` and moves the Euler target
/// `u` toward it along a straight line in angle space; the actual pose `y`
/// trails the target through a slerp lag and is clamped to the limits.
pub fn random_walk_with(
    limits: &JointLimits,
    n_steps: usize,
    seed: u64,
    cfg: &WalkConfig,
) -> Vec<(EulerAngles, Rotation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return out;
    }
    let mut u = limits.sample(&mut rng).to_array();
    let mut y = euler_to_rotation(&EulerAngles::from_array(u));
    let mut goal = u;
    out.push((EulerAngles::from_array(u), y));
    while out.len() < n_steps {
        if goal == u {
            goal = limits.sample(&mut rng).to_array();
        }
        // equal per-axis step count keeps the path a straight line
        let steps = (0..3)
            .map(|k| ((goal[k] - u[k]).abs() / cfg.rate).ceil())
            .fold(1.0f64, f64::max);
        let remaining: [f64; 3] = std::array::from_fn(|k| goal[k] - u[k]);
        if steps <= 1.0 {
            u = goal;
        } else {
            for k in 0..3 {
                u[k] += remaining[k] / steps;
            }
        }
        let target = euler_to_rotation(&EulerAngles::from_array(u));
        let lagged = y.slerp(&target, cfg.lag);
        y = euler_to_rotation(&limits.clamp(&rotation_to_euler(&lagged)));
        out.push((EulerAngles::from_array(u), y));
    }
    out
}
