//! Accuracy metrics and the sensor-spike robustness experiment.

use std::fmt::Write as _;

use crate::dvbf::{filter_series, DvbfModel, FilterState};
use crate::error::{Error, Result};
use crate::kv::{self, KvDoc};
use crate::lstm::LstmRegressor;
use crate::rotation::{euler_error, geodesic_angle};
use crate::simkit::{Sample, SensorFrame, Standardization};
use crate::Rotation;

pub const REPORT_VERSION: u32 = 1;

/// Anything that turns a standardized sample stream into pose estimates.
pub trait PoseEstimator {
    fn name(&self) -> &str;

    /// Leading samples of a stream that receive no estimate.
    fn warmup(&self) -> usize;

    /// Statistics the model was trained with; `None` accepts any dataset.
    fn stats(&self) -> Option<&Standardization>;

    /// Estimates for `samples[warmup..]`.
    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Rotation>>;
}

impl PoseEstimator for LstmRegressor<f64> {
    fn name(&self) -> &str {
        "lstm"
    }

    fn warmup(&self) -> usize {
        self.config().window - 1
    }

    fn stats(&self) -> Option<&Standardization> {
        Some(LstmRegressor::stats(self))
    }

    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Rotation>> {
        self.predict_series(samples)
    }
}

impl PoseEstimator for DvbfModel<f64> {
    fn name(&self) -> &str {
        "dvbf"
    }

    fn warmup(&self) -> usize {
        1
    }

    fn stats(&self) -> Option<&Standardization> {
        Some(DvbfModel::stats(self))
    }

    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Rotation>> {
        filter_series(self, samples)
    }
}

/// Debug model that returns the ground truth.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleModel;

impl PoseEstimator for OracleModel {
    fn name(&self) -> &str {
        "oracle"
    }

    fn warmup(&self) -> usize {
        0
    }

    fn stats(&self) -> Option<&Standardization> {
        None
    }

    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Rotation>> {
        Ok(samples.iter().map(|s| s.y).collect())
    }
}

/// Baseline that always answers the identity rotation.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityModel;

impl PoseEstimator for IdentityModel {
    fn name(&self) -> &str {
        "identity"
    }

    fn warmup(&self) -> usize {
        0
    }

    fn stats(&self) -> Option<&Standardization> {
        None
    }

    fn estimate(&self, samples: &[Sample]) -> Result<Vec<Rotation>> {
        Ok(vec![Rotation::identity(); samples.len()])
    }
}

/// Error of one estimate against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub t: usize,
    /// Wrapped per-axis Euler error (rad).
    pub euler: [f64; 3],
    pub geodesic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub dataset_id: String,
    pub warmup: usize,
    /// Per-axis Euler mean squared error (rad^2).
    pub euler_mse: [f64; 3],
    pub mean_geodesic: f64,
    pub series: Vec<ErrorRow>,
}

impl EvalReport {
    pub fn euler_rmse(&self) -> [f64; 3] {
        self.euler_mse.map(f64::sqrt)
    }

    /// Root of the mean over axes of the Euler MSE.
    pub fn mean_euler_rmse(&self) -> f64 {
        (self.euler_mse.iter().sum::<f64>() / 3.0).sqrt()
    }

    pub fn summary(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("model", &self.model);
        doc.set("dataset_id", &self.dataset_id);
        doc.set("warmup", self.warmup);
        doc.set("n", self.series.len());
        let rmse = self.euler_rmse();
        for (k, axis) in ["rx", "ry", "rz"].iter().enumerate() {
            doc.set(&format!("euler_mse.{axis}"), self.euler_mse[k]);
            doc.set(&format!("euler_rmse.{axis}"), rmse[k]);
        }
        doc.set("euler_rmse.mean", self.mean_euler_rmse());
        doc.set("mean_geodesic", self.mean_geodesic);
        doc
    }

    pub fn series_csv(&self) -> String {
        let mut out = kv::header("eval-series", REPORT_VERSION);
        out.push_str("\nt,err_rx,err_ry,err_rz,geodesic\n");
        for r in &self.series {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.t, r.euler[0], r.euler[1], r.euler[2], r.geodesic
            );
        }
        out
    }
}

fn check_stats(model: &dyn PoseEstimator, dataset: &Standardization) -> Result<()> {
    match model.stats() {
        Some(s) if s.fingerprint() != dataset.fingerprint() => Err(Error::StatsMismatch),
        _ => Ok(()),
    }
}

fn error_rows(samples: &[Sample], warmup: usize, poses: &[Rotation]) -> Vec<ErrorRow> {
    poses
        .iter()
        .zip(samples.iter().skip(warmup))
        .map(|(p, s)| ErrorRow {
            t: s.t,
            euler: euler_error(p, &s.y),
            geodesic: geodesic_angle(p, &s.y),
        })
        .collect()
}

/// Runs `model` over `samples` (normally the test split) and scores it
/// against the ground truth.
pub fn evaluate(model: &dyn PoseEstimator, samples: &[Sample], stats: &Standardization) -> Result<EvalReport> {
    check_stats(model, stats)?;
    let warmup = model.warmup();
    let poses = model.estimate(samples)?;
    let series = error_rows(samples, warmup, &poses);
    let n = series.len().max(1) as f64;
    let mut euler_mse = [0.0; 3];
    for r in &series {
        for (m, e) in euler_mse.iter_mut().zip(r.euler) {
            *m += e * e;
        }
    }
    euler_mse.iter_mut().for_each(|m| *m /= n);
    Ok(EvalReport {
        model: model.name().to_string(),
        dataset_id: stats.fingerprint(),
        warmup,
        euler_mse,
        mean_geodesic: series.iter().map(|r| r.geodesic).sum::<f64>() / n,
        series,
    })
}

/// Deterministic spike injection for [`spike_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeConfig {
    /// Number of spike locations, evenly spaced over the stream.
    pub count: usize,
    /// Offset in units of `sigma`, added to every axis of each spiked sensor.
    pub magnitude: f64,
    pub sigma: f64,
    /// Consecutive corrupted steps.
    pub duration: usize,
    /// Zero-based sensor indices.
    pub sensors: Vec<usize>,
    /// Steps after the spike ends that still count toward the filter's peak.
    pub horizon: usize,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        Self {
            count: 20,
            magnitude: 10.0,
            sigma: 0.05,
            duration: 3,
            sensors: vec![0],
            horizon: 50,
        }
    }
}

impl SpikeConfig {
    pub fn offset(&self) -> f64 {
        self.magnitude * self.sigma
    }

    fn corrupt(&self, frame: &SensorFrame) -> SensorFrame {
        let mut out = frame.clone();
        for &s in &self.sensors {
            for v in &mut out.values[3 * s..3 * s + 3] {
                *v += self.offset();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEvent {
    /// Index into the stream of the first corrupted step.
    pub step: usize,
    pub lstm_peak: f64,
    pub dvbf_peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeReport {
    pub config: SpikeConfig,
    pub events: Vec<SpikeEvent>,
    pub lstm_mean_peak: f64,
    pub dvbf_mean_peak: f64,
}

impl SpikeReport {
    /// DVBF over LSTM mean peak deviation.
    pub fn ratio(&self) -> f64 {
        self.dvbf_mean_peak / self.lstm_mean_peak
    }

    pub fn summary(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        let c = &self.config;
        doc.set("spike.count", c.count);
        doc.set("spike.magnitude", c.magnitude);
        doc.set("spike.sigma", c.sigma);
        doc.set("spike.duration", c.duration);
        doc.set(
            "spike.sensors",
            c.sensors.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
        );
        doc.set("spike.horizon", c.horizon);
        doc.set("lstm_mean_peak", self.lstm_mean_peak);
        doc.set("dvbf_mean_peak", self.dvbf_mean_peak);
        doc.set("ratio", self.ratio());
        doc
    }

    pub fn events_csv(&self) -> String {
        let mut out = kv::header("spike-events", REPORT_VERSION);
        out.push_str("\nstep,sensors,magnitude,lstm_peak,dvbf_peak\n");
        let sensors = self
            .config
            .sensors
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        for e in &self.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.step,
                sensors,
                self.config.offset(),
                e.lstm_peak,
                e.dvbf_peak
            );
        }
        out
    }
}

/// Renders a summary document with its format line.
pub fn render_summary(kind: &str, doc: &KvDoc) -> String {
    format!("{}\n{}", kv::header(kind, REPORT_VERSION), doc.render())
}

pub fn parse_summary(text: &str, kind: &str) -> Result<KvDoc> {
    kv::check_header(text.lines().next().unwrap_or_default(), kind, REPORT_VERSION)?;
    KvDoc::parse(text)
}

/// Injects the configured spike at `count` evenly spaced steps of `samples`
/// and records, per method, the largest geodesic deviation from that
/// method's own clean-run output.
///
/// The LSTM is affected only while a corrupted frame is inside its window.
/// The filter is restarted from its stored clean state just before each
/// spike and followed for `horizon` further steps.
pub fn spike_experiment(
    lstm: &LstmRegressor<f64>,
    dvbf: &DvbfModel<f64>,
    samples: &[Sample],
    stats: &Standardization,
    config: &SpikeConfig,
) -> Result<SpikeReport> {
    check_stats(lstm, stats)?;
    check_stats(dvbf, stats)?;
    let n_sensors = samples.first().map_or(0, |s| s.x.n_sensors());
    if config.sensors.iter().any(|s| *s >= n_sensors) {
        return Err(Error::InvalidConfig("spike sensor index out of range".into()));
    }
    let w = lstm.config().window;
    let first = w.max(2);
    let tail = config.duration + config.horizon.max(w);
    if config.count == 0 || config.duration == 0 || samples.len() < first + tail + config.count {
        return Err(Error::InvalidConfig("stream too short for the spike schedule".into()));
    }
    let span = samples.len() - tail - first;
    let steps: Vec<usize> = (0..config.count).map(|k| first + k * span / config.count).collect();

    let lstm_clean = lstm.predict_series(samples)?;
    let (states, dvbf_clean) = clean_filter_run(dvbf, samples)?;

    let mut events = Vec::with_capacity(steps.len());
    for &s in &steps {
        let corrupted: Vec<SensorFrame> = samples[s..s + config.duration]
            .iter()
            .map(|x| config.corrupt(&x.x))
            .collect();
        let frame = |t: usize| -> &SensorFrame {
            if (s..s + config.duration).contains(&t) {
                &corrupted[t - s]
            } else {
                &samples[t].x
            }
        };

        let mut lstm_peak = 0.0f64;
        for end in s..s + config.duration + w - 1 {
            let window: Vec<&SensorFrame> = (end + 1 - w..=end).map(frame).collect();
            let p = lstm.predict(&window)?;
            lstm_peak = lstm_peak.max(geodesic_angle(&p, &lstm_clean[end + 1 - w]));
        }

        let mut state: FilterState<f64> = states[s - 1].clone();
        let mut dvbf_peak = 0.0f64;
        for t in s..(s + config.duration + config.horizon).min(samples.len()) {
            let out = dvbf.filter_step(&mut state, frame(t), &samples[t].u)?;
            dvbf_peak = dvbf_peak.max(geodesic_angle(&out.pose, &dvbf_clean[t - 1]));
        }
        events.push(SpikeEvent {
            step: s,
            lstm_peak,
            dvbf_peak,
        });
    }
    let k = events.len() as f64;
    Ok(SpikeReport {
        config: config.clone(),
        lstm_mean_peak: events.iter().map(|e| e.lstm_peak).sum::<f64>() / k,
        dvbf_mean_peak: events.iter().map(|e| e.dvbf_peak).sum::<f64>() / k,
        events,
    })
}

/// Filter states after each sample and the poses for `samples[1..]`.
fn clean_filter_run(dvbf: &DvbfModel<f64>, samples: &[Sample]) -> Result<(Vec<FilterState<f64>>, Vec<Rotation>)> {
    let mut state = dvbf.filter_init(&samples[0].x)?;
    let mut states = Vec::with_capacity(samples.len());
    let mut poses = Vec::with_capacity(samples.len());
    states.push(state.clone());
    for s in &samples[1..] {
        poses.push(dvbf.filter_step(&mut state, &s.x, &s.u)?.pose);
        states.push(state.clone());
    }
    Ok((states, poses))
}
