use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kv::KvDoc;

use super::rig::SensorFrame;

/// Sensor corruption model, in the units of the frames it is applied to
/// (standardized units in generated datasets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    /// Probability, per step without an active spike, that a spike starts.
    pub outlier_prob: f64,
    /// Spike size as a multiple of `gaussian_sigma`.
    pub outlier_magnitude: f64,
    /// Spike length in steps.
    pub outlier_duration: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gaussian_sigma: 0.05,
            outlier_prob: 0.0,
            outlier_magnitude: 10.0,
            outlier_duration: 3,
        }
    }
}

impl NoiseSpec {
    pub fn clean() -> Self {
        Self {
            gaussian_sigma: 0.0,
            outlier_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise sigma must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return Err(Error::InvalidConfig("outlier probability must be in [0, 1]".into()));
        }
        if self.outlier_duration < 1 {
            return Err(Error::InvalidConfig("outlier duration must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self, doc: &mut KvDoc) {
        doc.set("noise.gaussian_sigma", self.gaussian_sigma);
        doc.set("noise.outlier_prob", self.outlier_prob);
        doc.set("noise.outlier_magnitude", self.outlier_magnitude);
        doc.set("noise.outlier_duration", self.outlier_duration);
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let d = Self::default();
        let spec = Self {
            gaussian_sigma: doc.parse_or("noise.gaussian_sigma", d.gaussian_sigma)?,
            outlier_prob: doc.parse_or("noise.outlier_prob", d.outlier_prob)?,
            outlier_magnitude: doc.parse_or("noise.outlier_magnitude", d.outlier_magnitude)?,
            outlier_duration: doc.parse_or("noise.outlier_duration", d.outlier_duration)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A spike in progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    pub sensor: usize,
    /// Signed offset added to each axis of the sensor.
    pub offset: f64,
    pub remaining: usize,
}

/// Stateful corruption stream: i.i.d. Gaussian noise on every channel plus
/// occasional held spikes on a single sensor.
#[derive(Debug, Clone)]
pub struct Corruptor {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
    active: Option<Spike>,
}

impl Corruptor {
    pub fn new(spec: NoiseSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            active: None,
        })
    }

    pub fn from_rng(spec: NoiseSpec, rng: ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            rng,
            active: None,
        })
    }

    pub fn active_spike(&self) -> Option<Spike> {
        self.active
    }

    pub fn corrupt(&mut self, frame: &SensorFrame) -> SensorFrame {
        let mut out = frame.clone();
        if self.spec.gaussian_sigma > 0.0 {
            let normal = Normal::new(0.0, self.spec.gaussian_sigma).expect("validated sigma");
            for v in &mut out.values {
                *v += normal.sample(&mut self.rng);
            }
        }
        if self.active.is_none()
            && self.spec.outlier_prob > 0.0
            && self.rng.gen_bool(self.spec.outlier_prob)
        {
            let sign = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            self.active = Some(Spike {
                sensor: self.rng.gen_range(0..frame.n_sensors()),
                offset: sign * self.spec.outlier_magnitude * self.spec.gaussian_sigma,
                remaining: self.spec.outlier_duration,
            });
        }
        if let Some(spike) = &mut self.active {
            for v in &mut out.values[3 * spike.sensor..3 * spike.sensor + 3] {
                *v += spike.offset;
            }
            spike.remaining -= 1;
            if spike.remaining == 0 {
                self.active = None;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> SensorFrame {
        SensorFrame {
            values: (0..12).map(|v| v as f64 * 0.1).collect(),
        }
    }

    #[test]
    fn clean_spec_leaves_frame_unchanged() {
        let mut c = Corruptor::new(NoiseSpec::clean(), 1).unwrap();
        for _ in 0..10 {
            assert_eq!(c.corrupt(&frame()), frame());
        }
    }

    #[test]
    fn forced_spike_hits_one_sensor_for_its_duration() {
        let spec = NoiseSpec {
            gaussian_sigma: 1e-3,
            outlier_prob: 1.0,
            outlier_magnitude: 1000.0,
            outlier_duration: 3,
        };
        let mut c = Corruptor::new(spec, 9).unwrap();
        let clean = frame();
        let mut spikes = Vec::new();
        for step in 0..6 {
            let out = c.corrupt(&clean);
            let dev: Vec<f64> = out.values.iter().zip(&clean.values).map(|(a, b)| a - b).collect();
            let hit: Vec<usize> = (0..4)
                .filter(|&i| dev[3 * i..3 * i + 3].iter().any(|d| d.abs() > 0.5))
                .collect();
            assert_eq!(hit.len(), 1, "step {step}");
            let offset = dev[3 * hit[0]];
            assert!((offset.abs() - 1.0).abs() < 0.01);
            spikes.push((hit[0], offset.signum()));
            // a spike ends after exactly `duration` steps
            assert_eq!(c.active_spike().is_none(), step % 3 == 2);
        }
        assert_eq!(spikes[0], spikes[1]);
        assert_eq!(spikes[1], spikes[2]);
        assert_eq!(spikes[3], spikes[4]);
        assert_eq!(spikes[4], spikes[5]);
    }

    #[test]
    fn gaussian_noise_has_requested_std() {
        let spec = NoiseSpec {
            gaussian_sigma: 0.1,
            ..NoiseSpec::default()
        };
        let mut c = Corruptor::new(spec, 21).unwrap();
        let zero = SensorFrame::zeros(4);
        let mut n = 0usize;
        let (mut s1, mut s2) = (0.0, 0.0);
        while n < 100_000 {
            for v in c.corrupt(&zero).values {
                s1 += v;
                s2 += v * v;
                n += 1;
            }
        }
        let mean = s1 / n as f64;
        let std = (s2 / n as f64 - mean * mean).sqrt();
        assert!((std - 0.1).abs() < 0.002, "std {std}");
    }

    #[test]
    fn invalid_specs() {
        let bad = NoiseSpec {
            outlier_prob: 1.5,
            ..NoiseSpec::default()
        };
        assert!(Corruptor::new(bad, 0).is_err());
        let bad = NoiseSpec {
            outlier_duration: 0,
            ..NoiseSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
