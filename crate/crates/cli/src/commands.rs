use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use magpose_core::diffcore::persist::MODEL_VERSION;
use magpose_core::dvbf::{train_dvbf_with, FilterState};
use magpose_core::evalkit::{
    evaluate, parse_summary, render_summary, spike_experiment, IdentityModel, OracleModel, PoseEstimator,
};
use magpose_core::kv;
use magpose_core::lstm::train_lstm_with;
use magpose_core::rotation::rotation_to_euler;
use magpose_core::simkit::{
    parse_meta, read_csv, render_meta, write_csv, CsvSchema, Sample, SensorFrame, Standardization, DATASET_VERSION,
};
use magpose_core::{DvbfModel, LstmRegressor, Rotation};

use crate::config::{RunConfig, UsageError};

pub const FILTER_VERSION: u32 = 1;
pub const LOG_VERSION: u32 = 1;

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Lstm,
    Dvbf,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Dvbf => "dvbf",
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn prepare_out(out: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write(&out.join("run.config"), &cfg.render())
}

/// A generated dataset directory read back from disk.
pub struct DatasetDir {
    pub stats: Standardization,
    pub n_sensors: usize,
    splits: Vec<Vec<Sample>>,
}

impl DatasetDir {
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("dataset.meta");
        let meta = parse_meta(&read(&meta_path)?).with_context(|| format!("in {}", meta_path.display()))?;
        let stats = Standardization::from_kv(&meta).with_context(|| format!("in {}", meta_path.display()))?;
        let id = meta.require("id")?.to_string();
        let mut splits = Vec::new();
        let mut n_sensors = 0;
        for name in SPLITS {
            let path = dir.join(format!("{name}.csv"));
            let split = read_csv(&read(&path)?).with_context(|| format!("in {}", path.display()))?;
            if split.id != id {
                return Err(magpose_core::Error::StatsMismatch)
                    .with_context(|| format!("{} belongs to dataset {}, not {id}", path.display(), split.id));
            }
            n_sensors = split.n_sensors;
            splits.push(split.samples);
        }
        Ok(Self {
            stats,
            n_sensors,
            splits,
        })
    }

    pub fn split(&self, name: &str) -> &[Sample] {
        let i = SPLITS.iter().position(|s| *s == name).expect("known split");
        &self.splits[i]
    }
}

pub fn generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let dcfg = cfg.dataset()?;
    let ds = magpose_core::simkit::generate_dataset(&dcfg)?;
    prepare_out(out, cfg)?;
    let n = dcfg.rig.n_sensors();
    let id = ds.id();
    let (train, val, test) = ds.split();
    for (name, part) in SPLITS.iter().zip([train, val, test]) {
        write(&out.join(format!("{name}.csv")), &write_csv(part, n, &id))?;
    }
    write(&out.join("dataset.meta"), &render_meta(&ds.meta()))?;
    println!(
        "dataset {id}: {} train, {} val, {} test rows -> {}",
        train.len(),
        val.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, kind: ModelKind, data: &Path, out: &Path) -> Result<()> {
    let ds = DatasetDir::load(data)?;
    let (train, val) = (ds.split("train"), ds.split("val"));
    prepare_out(out, cfg)?;
    let mut log = kv::header("train-log", LOG_VERSION);
    log.push('\n');
    let model_text = match kind {
        ModelKind::Lstm => {
            let tc = cfg.lstm(ds.n_sensors)?;
            log.push_str("epoch,train_loss,val_euler_rmse,wall_seconds\n");
            let (model, _) = train_lstm_with::<f64>(train, val, &ds.stats, &tc, |e| {
                let _ = writeln!(log, "{},{},{},{}", e.epoch, e.train_loss, e.val_euler_rmse, e.wall_seconds);
                eprintln!(
                    "epoch {:>3}  loss {:.6}  val euler rmse {:.5}  {:.1}s",
                    e.epoch, e.train_loss, e.val_euler_rmse, e.wall_seconds
                );
            })?;
            model.to_text()
        }
        ModelKind::Dvbf => {
            let tc = cfg.dvbf(ds.n_sensors)?;
            log.push_str("epoch,train_loss,val_euler_rmse,wall_seconds,val_elbo,val_geodesic\n");
            let (model, _) = train_dvbf_with::<f64>(train, val, &ds.stats, &tc, |e| {
                let _ = writeln!(
                    log,
                    "{},{},{},{},{},{}",
                    e.epoch, e.train_loss, e.val_euler_rmse, e.wall_seconds, e.val_elbo, e.val_geodesic
                );
                eprintln!(
                    "epoch {:>3}  loss {:.4}  val elbo {:.4}  val euler rmse {:.5}  {:.1}s",
                    e.epoch, e.train_loss, e.val_elbo, e.val_euler_rmse, e.wall_seconds
                );
            })?;
            model.to_text()
        }
    };
    write(&out.join(format!("{}.model", kind.name())), &model_text)?;
    write(&out.join(format!("{}_train_log.csv", kind.name())), &log)?;
    Ok(())
}

pub enum LoadedModel {
    Lstm(LstmRegressor),
    Dvbf(DvbfModel),
}

impl LoadedModel {
    pub fn load(path: &Path, expected: Option<ModelKind>) -> Result<Self> {
        let text = read(path)?;
        kv::check_header(text.lines().next().unwrap_or_default(), "model", MODEL_VERSION)
            .with_context(|| format!("in {}", path.display()))?;
        let kind = text
            .lines()
            .find_map(|l| l.strip_prefix("kind").and_then(|r| r.trim().strip_prefix('=')))
            .map(str::trim)
            .unwrap_or_default();
        if let Some(e) = expected {
            if e.name() != kind {
                return Err(UsageError(format!(
                    "{} holds a {kind} model, not {}",
                    path.display(),
                    e.name()
                ))
                .into());
            }
        }
        let ctx = || format!("in {}", path.display());
        match kind {
            "lstm" => Ok(Self::Lstm(LstmRegressor::from_text(&text).with_context(ctx)?)),
            "dvbf" => Ok(Self::Dvbf(DvbfModel::from_text(&text).with_context(ctx)?)),
            other => Err(magpose_core::Error::Format(format!("unknown model kind {other:?}")))
                .with_context(ctx),
        }
    }

    fn estimator(&self) -> &dyn PoseEstimator {
        match self {
            Self::Lstm(m) => m,
            Self::Dvbf(m) => m,
        }
    }

    fn n_sensors(&self) -> usize {
        match self {
            Self::Lstm(m) => m.config().n_sensors,
            Self::Dvbf(m) => m.config().n_sensors,
        }
    }
}

/// Which estimator `eval` scores.
pub enum EvalTarget {
    File(PathBuf, Option<ModelKind>),
    Oracle,
    Identity,
}

pub fn eval(cfg: &RunConfig, target: &EvalTarget, data: &Path, split: &str, out: &Path) -> Result<()> {
    let ds = DatasetDir::load(data)?;
    let loaded;
    let model: &dyn PoseEstimator = match target {
        EvalTarget::File(path, kind) => {
            loaded = LoadedModel::load(path, *kind)?;
            loaded.estimator()
        }
        EvalTarget::Oracle => &OracleModel,
        EvalTarget::Identity => &IdentityModel,
    };
    let report = evaluate(model, ds.split(split), &ds.stats)?;
    prepare_out(out, cfg)?;
    let mut summary = report.summary();
    summary.set("split", split);
    let text = render_summary("eval", &summary);
    write(&out.join("eval.summary"), &text)?;
    write(&out.join("eval_series.csv"), &report.series_csv())?;
    print!("{}", summary.render());
    Ok(())
}

pub fn spike(cfg: &RunConfig, lstm: &Path, dvbf: &Path, data: &Path, split: &str, out: &Path) -> Result<()> {
    let ds = DatasetDir::load(data)?;
    let LoadedModel::Lstm(lstm) = LoadedModel::load(lstm, Some(ModelKind::Lstm))? else {
        unreachable!("kind checked on load")
    };
    let LoadedModel::Dvbf(dvbf) = LoadedModel::load(dvbf, Some(ModelKind::Dvbf))? else {
        unreachable!("kind checked on load")
    };
    let report = spike_experiment(&lstm, &dvbf, ds.split(split), &ds.stats, &cfg.spike()?)?;
    prepare_out(out, cfg)?;
    let mut summary = report.summary();
    summary.set("split", split);
    write(&out.join("spike.summary"), &render_summary("spike", &summary))?;
    write(&out.join("spike_events.csv"), &report.events_csv())?;
    print!("{}", summary.render());
    Ok(())
}

enum Stream<'a> {
    Lstm {
        model: &'a LstmRegressor,
        window: VecDeque<SensorFrame>,
    },
    Dvbf {
        model: &'a DvbfModel,
        state: Option<FilterState<f64>>,
    },
}

impl Stream<'_> {
    /// Pose and, for the filter, the decoder standard deviations.
    fn step(&mut self, x: SensorFrame, u: &magpose_core::EulerAngles) -> magpose_core::Result<(Rotation, Vec<f64>)> {
        match self {
            Stream::Lstm { model, window } => {
                let w = model.config().window;
                if window.len() == w {
                    window.pop_front();
                }
                window.push_back(x);
                // until the window fills, the oldest frame is repeated
                let pad = w - window.len();
                let refs: Vec<&SensorFrame> = std::iter::repeat_n(&window[0], pad).chain(window.iter()).collect();
                Ok((model.predict(&refs)?, Vec::new()))
            }
            Stream::Dvbf { model, state } => {
                let out = match state {
                    Some(s) => model.filter_step(s, &x, u)?,
                    None => {
                        let s = model.filter_init(&x)?;
                        let out = model.decode_pose(&s.posterior.mu)?;
                        *state = Some(s);
                        out
                    }
                };
                Ok((out.pose, out.pose_uncertainty.sigma))
            }
        }
    }
}

/// Reads dataset-style CSV rows from `input` and writes one pose row per
/// valid input row, flushing after each. Malformed rows are reported on
/// `errors` and skipped. Returns (rows written, rows skipped).
pub fn filter(
    model: &LoadedModel,
    input: impl BufRead,
    mut output: impl Write,
    mut errors: impl Write,
) -> Result<(usize, usize)> {
    let mut stream = match model {
        LoadedModel::Lstm(m) => Stream::Lstm {
            model: m,
            window: VecDeque::new(),
        },
        LoadedModel::Dvbf(m) => Stream::Dvbf { model: m, state: None },
    };
    let mut schema: Option<CsvSchema> = None;
    let (mut written, mut skipped) = (0, 0);
    for (i, line) in input.lines().enumerate() {
        let line = line.context("cannot read input")?;
        let row_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with("#magpose-") {
            kv::check_header(&line, "dataset", DATASET_VERSION)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some(sc) = &schema else {
            let sc = CsvSchema::from_header(&line).context("input header")?;
            if sc.n_sensors() != model.n_sensors() {
                return Err(magpose_core::Error::DimensionMismatch {
                    expected: model.n_sensors(),
                    got: sc.n_sensors(),
                })
                .context("input sensor count");
            }
            let mut header = String::from("t,rx,ry,rz");
            for k in 0..9 {
                let _ = write!(header, ",r{}{}", k / 3, k % 3);
            }
            if matches!(model, LoadedModel::Dvbf(_)) {
                for k in 0..6 {
                    let _ = write!(header, ",sigma{k}");
                }
            }
            writeln!(output, "{}", kv::header("filter", FILTER_VERSION))?;
            writeln!(output, "{header}")?;
            output.flush()?;
            schema = Some(sc);
            continue;
        };
        let result = sc.parse_row(&line).and_then(|row| {
            let (pose, sigma) = stream.step(row.x, &row.u)?;
            Ok((row.t, pose, sigma))
        });
        match result {
            Ok((t, pose, sigma)) => {
                let mut out = t.to_string();
                for v in rotation_to_euler(&pose).to_array().iter().chain(&pose.to_row_major()).chain(&sigma) {
                    let _ = write!(out, ",{v}");
                }
                writeln!(output, "{out}")?;
                output.flush()?;
                written += 1;
            }
            Err(e) => {
                writeln!(errors, "line {row_no}: {e}; skipped")?;
                skipped += 1;
            }
        }
    }
    if schema.is_none() {
        bail!(magpose_core::Error::Format("input has no header row".into()));
    }
    Ok((written, skipped))
}

/// Prints the summaries found in each path (a run directory or a summary
/// file) together with statistics recomputed from the error series.
pub fn report(paths: &[PathBuf], mut output: impl Write) -> Result<()> {
    for path in paths {
        let files: Vec<PathBuf> = if path.is_dir() {
            ["eval.summary", "spike.summary"]
                .iter()
                .map(|f| path.join(f))
                .filter(|p| p.exists())
                .collect()
        } else {
            vec![path.clone()]
        };
        if files.is_empty() {
            bail!(magpose_core::Error::Format(format!(
                "{} contains no eval.summary or spike.summary",
                path.display()
            )));
        }
        for file in files {
            let text = read(&file)?;
            let kind = if text.starts_with("#magpose-spike ") {
                "spike"
            } else {
                "eval"
            };
            let doc = parse_summary(&text, kind).with_context(|| format!("in {}", file.display()))?;
            writeln!(output, "== {} ({kind})", file.display())?;
            for (k, v) in doc.entries() {
                writeln!(output, "{k:<18} {v}")?;
            }
            let series = file.with_file_name("eval_series.csv");
            if kind == "eval" && series.exists() {
                let (n, max) = series_stats(&read(&series)?).with_context(|| format!("in {}", series.display()))?;
                writeln!(output, "{:<18} {n}", "series.rows")?;
                writeln!(output, "{:<18} {max}", "series.max_geodesic")?;
            }
        }
    }
    Ok(())
}

fn series_stats(text: &str) -> Result<(usize, f64)> {
    let mut lines = text.lines();
    kv::check_header(lines.next().unwrap_or_default(), "eval-series", magpose_core::evalkit::REPORT_VERSION)?;
    lines.next();
    let mut n = 0;
    let mut max = 0.0f64;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let g: f64 = line
            .rsplit(',')
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| magpose_core::Error::Format(format!("bad series row {line:?}")))?;
        max = max.max(g);
        n += 1;
    }
    Ok((n, max))
}
