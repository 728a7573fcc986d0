use crate::error::{Error, Result};
use crate::kv::{format_f64_list, KvDoc};
use crate::rotation::Vec3;
use crate::Rotation;

use super::dipole::dipole_field;

/// One permanent magnet embedded in the ball, in the ball frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnet {
    /// Metres.
    pub position: Vec3<f64>,
    /// A m^2.
    pub moment: Vec3<f64>,
}

/// Three-axis magnetometers fixed in the socket frame plus the magnets
/// carried by the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRig {
    pub sensor_positions: Vec<Vec3<f64>>,
    pub magnets: Vec<Magnet>,
}

/// Flux readings for one time step, `n_sensors x 3`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub values: Vec<f64>,
}

impl SensorFrame {
    pub fn zeros(n_sensors: usize) -> Self {
        Self {
            values: vec![0.0; n_sensors * 3],
        }
    }

    pub fn n_sensors(&self) -> usize {
        self.values.len() / 3
    }

    pub fn sensor(&self, i: usize) -> [f64; 3] {
        [self.values[3 * i], self.values[3 * i + 1], self.values[3 * i + 2]]
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Default for SensorRig {
    /// Four sensors 90 degrees apart on a 25 mm radius disk 10 mm below the
    /// ball centre; three 0.1 A m^2 magnets 120 degrees apart on a 12 mm ring,
    /// each with a different moment direction (radial, axial, tangential) so
    /// that no rotation of the ball maps the magnet set onto itself.
    fn default() -> Self {
        let sensor_positions = (0..4)
            .map(|k| {
                let a = k as f64 * std::f64::consts::FRAC_PI_2;
                [0.025 * a.cos(), 0.025 * a.sin(), -0.010]
            })
            .collect();
        let magnets = (0..3)
            .map(|k| {
                let a = k as f64 * 2.0 * std::f64::consts::FRAC_PI_3;
                let (s, c) = a.sin_cos();
                let dir = match k {
                    0 => [c, s, 0.0],
                    1 => [0.0, 0.0, 1.0],
                    _ => [-s, c, 0.0],
                };
                Magnet {
                    position: [0.012 * c, 0.012 * s, -0.005],
                    moment: dir.map(|v| 0.1 * v),
                }
            })
            .collect();
        Self {
            sensor_positions,
            magnets,
        }
    }
}

impl SensorRig {
    pub fn n_sensors(&self) -> usize {
        self.sensor_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensor_positions.is_empty() {
            return Err(Error::InvalidConfig("rig needs at least one sensor".into()));
        }
        if self.magnets.is_empty() {
            return Err(Error::InvalidConfig("rig needs at least one magnet".into()));
        }
        for (i, a) in self.sensor_positions.iter().enumerate() {
            for b in &self.sensor_positions[i + 1..] {
                if a == b {
                    return Err(Error::InvalidConfig("sensor positions must be distinct".into()));
                }
            }
        }
        Ok(())
    }

    /// Same rig with every sensor position rotated by `r` (about the ball
    /// centre).
    pub fn rotated(&self, r: &Rotation) -> Self {
        Self {
            sensor_positions: self.sensor_positions.iter().map(|p| r.apply(p)).collect(),
            magnets: self.magnets.clone(),
        }
    }

    pub fn to_kv(&self, doc: &mut KvDoc) {
        doc.set("rig.n_sensors", self.n_sensors());
        let flat = |v: &[Vec3<f64>]| format_f64_list(&v.iter().flatten().copied().collect::<Vec<_>>());
        doc.set("rig.sensor_positions", flat(&self.sensor_positions));
        let pos: Vec<_> = self.magnets.iter().map(|m| m.position).collect();
        let mom: Vec<_> = self.magnets.iter().map(|m| m.moment).collect();
        doc.set("rig.magnet_positions", flat(&pos));
        doc.set("rig.magnet_moments", flat(&mom));
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let triples = |key: &str| -> Result<Vec<Vec3<f64>>> {
            let v = doc.parse_list(key)?;
            if v.len() % 3 != 0 {
                return Err(Error::Format(format!("{key} needs a multiple of 3 values")));
            }
            Ok(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
        };
        let sensor_positions = triples("rig.sensor_positions")?;
        let pos = triples("rig.magnet_positions")?;
        let mom = triples("rig.magnet_moments")?;
        if pos.len() != mom.len() {
            return Err(Error::Format("magnet positions and moments differ in count".into()));
        }
        let rig = Self {
            sensor_positions,
            magnets: pos
                .into_iter()
                .zip(mom)
                .map(|(position, moment)| Magnet { position, moment })
                .collect(),
        };
        rig.validate()?;
        Ok(rig)
    }
}

/// Sums the fields of all magnets, carried by the ball at `pose`, at each
/// sensor position.
pub fn read_sensors(rig: &SensorRig, pose: &Rotation) -> Result<SensorFrame> {
    let placed: Vec<(Vec3<f64>, Vec3<f64>)> = rig
        .magnets
        .iter()
        .map(|m| (pose.apply(&m.position), pose.apply(&m.moment)))
        .collect();
    let mut values = Vec::with_capacity(rig.n_sensors() * 3);
    for s in &rig.sensor_positions {
        let mut b = [0.0; 3];
        for (pos, mom) in &placed {
            let f = dipole_field(mom, pos, s)?;
            b = [b[0] + f[0], b[1] + f[1], b[2] + f[2]];
        }
        values.extend_from_slice(&b);
    }
    Ok(SensorFrame { values })
}
