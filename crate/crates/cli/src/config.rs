//! Run configuration: a flat `key = value` document resolved from built-in
//! defaults, an optional file, then command-line overrides.

use std::fmt;

use magpose_core::dvbf::{DvbfConfig, DvbfTrainConfig};
use magpose_core::evalkit::SpikeConfig;
use magpose_core::kv::{self, KvDoc};
use magpose_core::lstm::{LstmConfig, LstmTrainConfig};
use magpose_core::simkit::DatasetConfig;

pub const CONFIG_VERSION: u32 = 1;

/// A configuration problem; maps to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Resolved settings for every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    doc: KvDoc,
}

fn defaults() -> KvDoc {
    let mut doc = KvDoc::new();
    DatasetConfig::default().to_kv(&mut doc);

    let lstm = LstmTrainConfig::default();
    doc.set("lstm.hidden", lstm.model.hidden);
    doc.set("lstm.window", lstm.model.window);
    doc.set("lstm.epochs", lstm.epochs);
    doc.set("lstm.batch_size", lstm.batch_size);
    doc.set("lstm.lr", lstm.lr);

    let dvbf = DvbfTrainConfig::default();
    doc.set("dvbf.latent", dvbf.model.latent);
    doc.set("dvbf.hidden", dvbf.model.hidden);
    doc.set("dvbf.alpha", dvbf.model.alpha);
    doc.set("dvbf.epochs", dvbf.epochs);
    doc.set("dvbf.batch_size", dvbf.batch_size);
    doc.set("dvbf.seq_len", dvbf.seq_len);
    doc.set("dvbf.stride", dvbf.stride);
    doc.set("dvbf.lr", dvbf.lr);
    doc.set("dvbf.val_sequences", dvbf.val_sequences);

    let spike = SpikeConfig::default();
    doc.set("spike.count", spike.count);
    doc.set("spike.magnitude", spike.magnitude);
    doc.set("spike.sigma", spike.sigma);
    doc.set("spike.duration", spike.duration);
    doc.set("spike.sensors", join(&spike.sensors));
    doc.set("spike.horizon", spike.horizon);
    doc
}

fn join(v: &[usize]) -> String {
    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Layers `file` (config text) and `overrides` (`key=value`) over the
    /// defaults. The seed has no default.
    pub fn resolve(file: Option<&str>, overrides: &[String], seed: Option<u64>) -> Result<Self, UsageError> {
        let mut doc = defaults();
        doc.set("seed", "");
        let mut apply = |k: &str, v: &str| -> Result<(), UsageError> {
            if doc.get(k).is_none() {
                return Err(usage(format!("unknown config key {k}")));
            }
            doc.set(k, v);
            Ok(())
        };
        if let Some(text) = file {
            let parsed = KvDoc::parse(text).map_err(|e| usage(format!("config file: {e}")))?;
            for (k, v) in parsed.entries() {
                apply(k, v)?;
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| usage(format!("override {o:?} is not key=value")))?;
            apply(k.trim(), v.trim())?;
        }
        if let Some(s) = seed {
            doc.set("seed", s);
        }
        if doc.get("seed").unwrap_or_default().is_empty() {
            return Err(usage("a seed is required (--seed or `seed` in the config file)"));
        }
        let cfg = Self { doc };
        // surface malformed values before any work starts
        cfg.dataset()?;
        cfg.lstm(4)?;
        cfg.dvbf(4)?;
        cfg.spike()?;
        Ok(cfg)
    }

    fn value<V: std::str::FromStr>(&self, key: &str) -> Result<V, UsageError> {
        self.doc.parse_value(key).map_err(|e| usage(e.to_string()))
    }

    pub fn dataset(&self) -> Result<DatasetConfig, UsageError> {
        DatasetConfig::from_kv(&self.doc).map_err(|e| usage(e.to_string()))
    }

    pub fn lstm(&self, n_sensors: usize) -> Result<LstmTrainConfig, UsageError> {
        Ok(LstmTrainConfig {
            model: LstmConfig {
                hidden: self.value("lstm.hidden")?,
                window: self.value("lstm.window")?,
                n_sensors,
            },
            epochs: self.value("lstm.epochs")?,
            batch_size: self.value("lstm.batch_size")?,
            lr: self.value("lstm.lr")?,
            seed: self.value("seed")?,
        })
    }

    pub fn dvbf(&self, n_sensors: usize) -> Result<DvbfTrainConfig, UsageError> {
        Ok(DvbfTrainConfig {
            model: DvbfConfig {
                latent: self.value("dvbf.latent")?,
                hidden: self.value("dvbf.hidden")?,
                n_sensors,
                alpha: self.value("dvbf.alpha")?,
            },
            epochs: self.value("dvbf.epochs")?,
            batch_size: self.value("dvbf.batch_size")?,
            seq_len: self.value("dvbf.seq_len")?,
            stride: self.value("dvbf.stride")?,
            lr: self.value("dvbf.lr")?,
            seed: self.value("seed")?,
            val_sequences: self.value("dvbf.val_sequences")?,
        })
    }

    pub fn spike(&self) -> Result<SpikeConfig, UsageError> {
        let sensors = self
            .doc
            .require("spike.sensors")
            .map_err(|e| usage(e.to_string()))?
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| usage("spike.sensors must be comma-separated indices"))?;
        Ok(SpikeConfig {
            count: self.value("spike.count")?,
            magnitude: self.value("spike.magnitude")?,
            sigma: self.value("spike.sigma")?,
            duration: self.value("spike.duration")?,
            sensors,
            horizon: self.value("spike.horizon")?,
        })
    }

    /// The resolved configuration; feeding it back through `--config`
    /// reproduces the run.
    pub fn render(&self) -> String {
        format!("{}\n{}", kv::header("config", CONFIG_VERSION), self.doc.render())
    }
}
