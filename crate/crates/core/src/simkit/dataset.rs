use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kv::{self, format_f64_list, KvDoc};
use crate::{EulerAngles, Rotation};

use super::noise::{Corruptor, NoiseSpec};
use super::rig::{read_sensors, SensorFrame, SensorRig};
use super::walk::{random_walk_with, JointLimits, WalkConfig};

pub const DATASET_VERSION: u32 = 1;
pub const META_VERSION: u32 = 1;

/// Seconds between consecutive samples.
pub const STEP_SECONDS: f64 = 0.02;

/// One recorded time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: usize,
    /// Standardized sensor readings.
    pub x: SensorFrame,
    /// Joint target (control input).
    pub u: EulerAngles,
    /// Ground-truth pose.
    pub y: Rotation,
}

/// Per-channel affine normalization frozen from the clean training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(frames: &[SensorFrame]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidConfig("cannot standardize an empty split".into()))?;
        let c = first.values.len();
        let n = frames.len() as f64;
        let mut mean = vec![0.0; c];
        for f in frames {
            for (m, v) in mean.iter_mut().zip(&f.values) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for f in frames {
            for ((s, v), m) in var.iter_mut().zip(&f.values).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(1e-300)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, frame: &SensorFrame) -> SensorFrame {
        SensorFrame {
            values: frame
                .values
                .iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect(),
        }
    }

    /// Short content hash; identical statistics give identical ids.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format_f64_list(&self.mean));
        h.update(";");
        h.update(format_f64_list(&self.std));
        hex::encode(&h.finalize()[..8])
    }

    pub fn to_kv(&self, doc: &mut KvDoc) {
        doc.set("stats.mean", format_f64_list(&self.mean));
        doc.set("stats.std", format_f64_list(&self.std));
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let mean = doc.parse_list("stats.mean")?;
        let std = doc.parse_list("stats.std")?;
        if mean.len() != std.len() {
            return Err(Error::Format("stats.mean and stats.std differ in length".into()));
        }
        Ok(Self { mean, std })
    }
}

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub rig: SensorRig,
    pub limits: JointLimits,
    pub walk: WalkConfig,
    pub n_steps: usize,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Leading fraction of the trajectory treated as the training split
    /// (statistics are fitted on it).
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            rig: SensorRig::default(),
            limits: JointLimits::default(),
            walk: WalkConfig::default(),
            n_steps: 50_000,
            noise: NoiseSpec::default(),
            seed: 1,
            train_fraction: 0.70,
            val_fraction: 0.15,
        }
    }
}

/// Contiguous split lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be >= 1".into()));
        }
        let (a, b) = (self.train_fraction, self.val_fraction);
        if !(a > 0.0 && b >= 0.0 && a + b <= 1.0) {
            return Err(Error::InvalidConfig("split fractions must be positive and sum to <= 1".into()));
        }
        self.rig.validate()?;
        self.limits.validate()?;
        self.noise.validate()
    }

    pub fn splits(&self) -> SplitSizes {
        let n = self.n_steps;
        let train = ((n as f64 * self.train_fraction).round() as usize).clamp(1, n);
        let val = ((n as f64 * self.val_fraction).round() as usize).min(n - train);
        SplitSizes {
            train,
            val,
            test: n - train - val,
        }
    }

    pub fn to_kv(&self, doc: &mut KvDoc) {
        doc.set("seed", self.seed);
        doc.set("n_steps", self.n_steps);
        doc.set("train_fraction", self.train_fraction);
        doc.set("val_fraction", self.val_fraction);
        doc.set("walk.rate", self.walk.rate);
        doc.set("walk.lag", self.walk.lag);
        self.rig.to_kv(doc);
        self.limits.to_kv(doc);
        self.noise.to_kv(doc);
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            rig: SensorRig::from_kv(doc)?,
            limits: JointLimits::from_kv(doc)?,
            walk: WalkConfig {
                rate: doc.parse_or("walk.rate", d.walk.rate)?,
                lag: doc.parse_or("walk.lag", d.walk.lag)?,
            },
            n_steps: doc.parse_value("n_steps")?,
            noise: NoiseSpec::from_kv(doc)?,
            seed: doc.parse_value("seed")?,
            train_fraction: doc.parse_or("train_fraction", d.train_fraction)?,
            val_fraction: doc.parse_or("val_fraction", d.val_fraction)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A generated trajectory with its frozen standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub samples: Vec<Sample>,
    pub stats: Standardization,
}

impl Dataset {
    pub fn id(&self) -> String {
        self.stats.fingerprint()
    }

    pub fn split(&self) -> (&[Sample], &[Sample], &[Sample]) {
        let s = self.config.splits();
        let (train, rest) = self.samples.split_at(s.train);
        let (val, test) = rest.split_at(s.val);
        (train, val, test)
    }

    /// Sidecar metadata: generation config, statistics and split sizes.
    pub fn meta(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("id", self.id());
        doc.set("step_seconds", STEP_SECONDS);
        self.config.to_kv(&mut doc);
        let s = self.config.splits();
        doc.set("split.train", s.train);
        doc.set("split.val", s.val);
        doc.set("split.test", s.test);
        self.stats.to_kv(&mut doc);
        doc
    }
}

pub fn render_meta(doc: &KvDoc) -> String {
    format!("{}\n{}", kv::header("meta", META_VERSION), doc.render())
}

pub fn parse_meta(text: &str) -> Result<KvDoc> {
    kv::check_header(text.lines().next().unwrap_or_default(), "meta", META_VERSION)?;
    KvDoc::parse(text)
}

/// Random walk, sensor simulation, standardization (statistics from the clean
/// training split), then corruption in standardized units.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let walk = random_walk_with(&cfg.limits, cfg.n_steps, cfg.seed, &cfg.walk);
    let clean = walk
        .iter()
        .map(|(_, y)| read_sensors(&cfg.rig, y))
        .collect::<Result<Vec<_>>>()?;
    let stats = Standardization::fit(&clean[..cfg.splits().train])?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(1);
    let mut corruptor = Corruptor::from_rng(cfg.noise, noise_rng)?;
    let samples = walk
        .into_iter()
        .zip(clean)
        .enumerate()
        .map(|(t, ((u, y), frame))| Sample {
            t,
            x: corruptor.corrupt(&stats.apply(&frame)),
            u,
            y,
        })
        .collect();
    Ok(Dataset {
        config: cfg.clone(),
        samples,
        stats,
    })
}

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn csv_header(n_sensors: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(["u_rx", "u_ry", "u_rz"].map(String::from));
    for i in 0..3 {
        for j in 0..3 {
            cols.push(format!("y{i}{j}"));
        }
    }
    for s in 0..n_sensors {
        for a in AXES {
            cols.push(format!("s{s}_{a}"));
        }
    }
    cols.join(",")
}

/// Dataset CSV: version line carrying the dataset id, header, one row per step.
pub fn write_csv(samples: &[Sample], n_sensors: usize, id: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} id={id}", kv::header("dataset", DATASET_VERSION));
    let _ = writeln!(out, "{}", csv_header(n_sensors));
    for s in samples {
        let _ = write!(out, "{}", s.t);
        for v in s.u.to_array() {
            let _ = write!(out, ",{v}");
        }
        for v in s.y.to_row_major() {
            let _ = write!(out, ",{v}");
        }
        for v in &s.x.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Column layout resolved from a header row. The pose columns are optional
/// so that streaming input without ground truth parses with the same schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    t: usize,
    u: [usize; 3],
    y: Option<[usize; 9]>,
    x: Vec<usize>,
    width: usize,
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: usize,
    pub u: EulerAngles,
    pub y: Option<Rotation>,
    pub x: SensorFrame,
}

impl CsvSchema {
    pub fn from_header(line: &str) -> Result<Self> {
        let names: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        let find = |n: &str| {
            names
                .iter()
                .position(|c| *c == n)
                .ok_or_else(|| Error::Format(format!("header lacks column {n}")))
        };
        let t = find("t")?;
        let u = [find("u_rx")?, find("u_ry")?, find("u_rz")?];
        let y = (0..9)
            .map(|k| names.iter().position(|c| *c == format!("y{}{}", k / 3, k % 3)))
            .collect::<Option<Vec<_>>>()
            .map(|v| <[usize; 9]>::try_from(v).expect("nine columns"));
        let mut x = Vec::new();
        for s in 0.. {
            let cols: Vec<Option<usize>> = AXES
                .iter()
                .map(|a| names.iter().position(|c| *c == format!("s{s}_{a}")))
                .collect();
            match cols.iter().flatten().count() {
                0 => break,
                3 => x.extend(cols.into_iter().flatten()),
                _ => return Err(Error::Format(format!("sensor {s} needs x, y and z columns"))),
            }
        }
        if x.is_empty() {
            return Err(Error::Format("header has no sensor columns".into()));
        }
        Ok(Self {
            t,
            u,
            y,
            x,
            width: names.len(),
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.x.len() / 3
    }

    pub fn has_pose(&self) -> bool {
        self.y.is_some()
    }

    pub fn parse_row(&self, line: &str) -> Result<CsvRow> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != self.width {
            return Err(Error::Format(format!(
                "expected {} fields, found {}",
                self.width,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = fields[i]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("field {} is not a number: {:?}", i + 1, fields[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Format(format!("field {} is not finite", i + 1)))
            }
        };
        let t = fields[self.t]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad step index {:?}", fields[self.t])))?;
        let u = EulerAngles::new(num(self.u[0])?, num(self.u[1])?, num(self.u[2])?);
        let y = match &self.y {
            Some(cols) => {
                let mut m = [0.0; 9];
                for (dst, c) in m.iter_mut().zip(cols) {
                    *dst = num(*c)?;
                }
                Some(Rotation::from_row_major(&m))
            }
            None => None,
        };
        let x = SensorFrame {
            values: self.x.iter().map(|c| num(*c)).collect::<Result<_>>()?,
        };
        Ok(CsvRow { t, u, y, x })
    }
}

/// A dataset split read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSplit {
    pub id: String,
    pub n_sensors: usize,
    pub samples: Vec<Sample>,
}

/// Strict reader: every row must parse and carry ground truth.
pub fn read_csv(text: &str) -> Result<CsvSplit> {
    let mut lines = text.lines();
    let version = lines.next().unwrap_or_default();
    kv::check_header(version, "dataset", DATASET_VERSION)?;
    let id = version
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("id="))
        .ok_or_else(|| Error::Format("dataset version line has no id".into()))?
        .to_string();
    let schema = CsvSchema::from_header(lines.next().unwrap_or_default())?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = schema
            .parse_row(line)
            .map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?;
        let y = row
            .y
            .ok_or_else(|| Error::Format("dataset rows need pose columns".into()))?;
        samples.push(Sample {
            t: row.t,
            x: row.x,
            u: row.u,
            y,
        });
    }
    Ok(CsvSplit {
        id,
        n_sensors: schema.n_sensors(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::rotation_to_euler;

    fn small(n: usize, noise: NoiseSpec) -> DatasetConfig {
        DatasetConfig {
            n_steps: n,
            noise,
            seed: 11,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn csv_is_byte_identical_across_runs() {
        let cfg = small(100, NoiseSpec::default());
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(write_csv(&a.samples, 4, &a.id()), write_csv(&b.samples, 4, &b.id()));
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate_dataset(&small(50, NoiseSpec::default())).unwrap();
        let text = write_csv(&ds.samples, 4, &ds.id());
        let back = read_csv(&text).unwrap();
        assert_eq!(back.id, ds.id());
        assert_eq!(back.samples, ds.samples);
    }

    #[test]
    fn schema_without_pose_and_bad_rows() {
        let header = "t,u_rx,u_ry,u_rz,s0_x,s0_y,s0_z";
        let schema = CsvSchema::from_header(header).unwrap();
        assert!(!schema.has_pose());
        let row = schema.parse_row("3,0.1,0.2,0.3,1,2,3").unwrap();
        assert_eq!(row.t, 3);
        assert_eq!(row.x.values, vec![1.0, 2.0, 3.0]);
        assert!(schema.parse_row("3,0.1,0.2,0.3,1,2").is_err());
        assert!(schema.parse_row("3,0.1,0.2,0.3,1,abc,3").is_err());
        assert!(CsvSchema::from_header("t,u_rx,u_ry,u_rz,s0_x,s0_y").is_err());
    }

    /// Statistics are fitted on the clean training split and noise is added
    /// afterwards, so the noisy training split is close to, but not exactly,
    /// zero-mean unit-variance.
    #[test]
    fn standardized_channels_are_normalized() {
        let ds = generate_dataset(&small(14_286, NoiseSpec::default())).unwrap();
        let (train, _, _) = ds.split();
        assert_eq!(train.len(), 10_000);
        let n = train.len() as f64;
        for ch in 0..12 {
            let mean = train.iter().map(|s| s.x.values[ch]).sum::<f64>() / n;
            let var = train
                .iter()
                .map(|s| (s.x.values[ch] - mean).powi(2))
                .sum::<f64>()
                / n;
            assert!(mean.abs() < 0.05, "channel {ch} mean {mean}");
            let std = var.sqrt();
            assert!((0.9..=1.1).contains(&std), "channel {ch} std {std}");
        }
    }

    #[test]
    fn clean_readings_are_a_function_of_pose() {
        let ds = generate_dataset(&small(300, NoiseSpec::clean())).unwrap();
        for s in &ds.samples {
            let again = ds.stats.apply(&read_sensors(&ds.config.rig, &s.y).unwrap());
            assert_eq!(again, s.x);
        }
    }

    #[test]
    fn split_sizes() {
        let s = DatasetConfig::default().splits();
        assert_eq!((s.train, s.val, s.test), (35_000, 7_500, 7_500));
        let tiny = small(1, NoiseSpec::default()).splits();
        assert_eq!(tiny.train + tiny.val + tiny.test, 1);
        assert!(small(0, NoiseSpec::default()).validate().is_err());
    }

    #[test]
    fn meta_round_trip() {
        let ds = generate_dataset(&small(40, NoiseSpec::default())).unwrap();
        let doc = parse_meta(&render_meta(&ds.meta())).unwrap();
        assert_eq!(DatasetConfig::from_kv(&doc).unwrap(), ds.config);
        assert_eq!(Standardization::from_kv(&doc).unwrap(), ds.stats);
        assert_eq!(doc.get("id"), Some(ds.id().as_str()));
    }

    /// Ordinary least squares from readings to each Euler axis; the clean
    /// data must carry a linear signal (R^2 > 0.5) on every axis.
    #[test]
    fn readings_correlate_with_pose() {
        let ds = generate_dataset(&small(10_000, NoiseSpec::clean())).unwrap();
        let rows: Vec<Vec<f64>> = ds
            .samples
            .iter()
            .map(|s| {
                let mut r = vec![1.0];
                r.extend_from_slice(&s.x.values);
                r
            })
            .collect();
        let p = rows[0].len();
        for axis in 0..3 {
            let target: Vec<f64> = ds
                .samples
                .iter()
                .map(|s| rotation_to_euler(&s.y).to_array()[axis])
                .collect();
            let mut a = vec![vec![0.0; p + 1]; p];
            for (r, y) in rows.iter().zip(&target) {
                for i in 0..p {
                    for j in 0..p {
                        a[i][j] += r[i] * r[j];
                    }
                    a[i][p] += r[i] * y;
                }
            }
            // Gauss-Jordan with partial pivoting
            for col in 0..p {
                let piv = (col..p)
                    .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
                    .unwrap();
                a.swap(col, piv);
                let d = a[col][col];
                for v in a[col].iter_mut() {
                    *v /= d;
                }
                for row in 0..p {
                    if row != col {
                        let f = a[row][col];
                        let pivot_row = a[col].clone();
                        for (v, pv) in a[row].iter_mut().zip(pivot_row) {
                            *v -= f * pv;
                        }
                    }
                }
            }
            let beta: Vec<f64> = a.iter().map(|r| r[p]).collect();
            let mean = target.iter().sum::<f64>() / target.len() as f64;
            let (mut ss_res, mut ss_tot) = (0.0, 0.0);
            for (r, y) in rows.iter().zip(&target) {
                let pred: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
                ss_res += (y - pred).powi(2);
                ss_tot += (y - mean).powi(2);
            }
            let r2 = 1.0 - ss_res / ss_tot;
            assert!(r2 > 0.5, "axis {axis} R^2 = {r2}");
        }
    }
}
