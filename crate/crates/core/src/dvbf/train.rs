use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{Adam, Tape};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rotation::{euler_error, geodesic_angle, Rotation};
use crate::simkit::{Sample, Standardization};

use super::model::{draw_noise, DvbfConfig, DvbfModel};

/// Optimization settings for [`train_dvbf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvbfTrainConfig {
    pub model: DvbfConfig,
    pub epochs: usize,
    /// Subsequences per optimizer step.
    pub batch_size: usize,
    pub seq_len: usize,
    /// Offset between consecutive training subsequence starts.
    pub stride: usize,
    pub lr: f64,
    pub seed: u64,
    /// Non-overlapping validation subsequences scored for the ELBO.
    pub val_sequences: usize,
}

impl Default for DvbfTrainConfig {
    fn default() -> Self {
        Self {
            model: DvbfConfig::default(),
            epochs: 30,
            batch_size: 16,
            seq_len: 32,
            stride: 4,
            lr: 1e-3,
            seed: 1,
            val_sequences: 64,
        }
    }
}

/// Per-epoch record; ELBO quantities are averaged per time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvbfEpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_elbo: f64,
    pub train_recon_x: f64,
    pub train_recon_y: f64,
    pub train_kl: f64,
    pub val_elbo: f64,
    /// Mean over axes of the per-axis Euler mean squared error of the
    /// streaming filter on the validation split (rad^2).
    pub val_euler_mse: f64,
    pub val_euler_rmse: f64,
    pub val_geodesic: f64,
    pub wall_seconds: f64,
}

/// Trailing moving averages: entry `k` averages `values[k..k + window]`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 {
        return Vec::new();
    }
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// Streams `samples` through the filter (initialized on the first sample)
/// and returns the poses for `samples[1..]`.
pub fn filter_series<T: Real>(model: &DvbfModel<T>, samples: &[Sample]) -> Result<Vec<Rotation<T>>> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let mut state = model.filter_init(&first.x)?;
    samples[1..]
        .iter()
        .map(|s| model.filter_step(&mut state, &s.x, &s.u).map(|o| o.pose))
        .collect()
}

/// Euler MSE (mean over axes) and mean geodesic error of the streaming filter.
pub fn filter_metrics<T: Real>(model: &DvbfModel<T>, samples: &[Sample]) -> Result<(f64, f64)> {
    let poses = filter_series(model, samples)?;
    if poses.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut euler = 0.0;
    let mut geo = 0.0;
    for (p, s) in poses.iter().zip(&samples[1..]) {
        let p = Rotation::from_row_major(&p.to_row_major().map(|v| v.as_f64()));
        euler += euler_error(&p, &s.y).iter().map(|e| e * e).sum::<f64>() / 3.0;
        geo += geodesic_angle(&p, &s.y);
    }
    let n = poses.len() as f64;
    Ok((euler / n, geo / n))
}

struct ValidationSet<T> {
    starts: Vec<usize>,
    noise: Vec<Vec<Vec<T>>>,
}

impl<T: Real> ValidationSet<T> {
    fn new(val: &[Sample], config: &DvbfTrainConfig) -> Self {
        let l = config.seq_len;
        let starts: Vec<usize> = (0..val.len().saturating_sub(l - 1))
            .step_by(l)
            .take(config.val_sequences)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(2);
        let noise = starts
            .iter()
            .map(|_| draw_noise(&mut rng, l, config.model.latent))
            .collect();
        Self { starts, noise }
    }

    /// Per-step ELBO with the frozen noise.
    fn elbo(&self, model: &DvbfModel<T>, val: &[Sample], l: usize) -> Result<f64> {
        if self.starts.is_empty() {
            return Ok(f64::NAN);
        }
        let mut total = 0.0;
        for (s, noise) in self.starts.iter().zip(&self.noise) {
            total += model.elbo(&val[*s..*s + l], noise)?.elbo.as_f64();
        }
        Ok(total / (self.starts.len() * l) as f64)
    }
}

/// Trains on overlapping subsequences of `train` by minimizing the
/// constrained loss with Adam.
pub fn train_dvbf<T: Real>(
    train: &[Sample],
    val: &[Sample],
    stats: &Standardization,
    config: &DvbfTrainConfig,
) -> Result<(DvbfModel<T>, Vec<DvbfEpochLog>)> {
    train_dvbf_with(train, val, stats, config, |_| {})
}

/// [`train_dvbf`] with a callback invoked after each epoch.
pub fn train_dvbf_with<T: Real>(
    train: &[Sample],
    val: &[Sample],
    stats: &Standardization,
    config: &DvbfTrainConfig,
    mut on_epoch: impl FnMut(&DvbfEpochLog),
) -> Result<(DvbfModel<T>, Vec<DvbfEpochLog>)> {
    let l = config.seq_len;
    if l == 0 || config.batch_size == 0 || config.stride == 0 {
        return Err(Error::InvalidConfig(
            "sequence length, batch size and stride must be positive".into(),
        ));
    }
    if train.len() < l {
        return Err(Error::InvalidConfig(format!(
            "training split needs at least {l} steps"
        )));
    }
    let mut model = DvbfModel::<T>::new(config.model, stats.clone(), config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let adam = Adam::with_lr(T::lit(config.lr));
    let validation = ValidationSet::<T>::new(val, config);
    let mut starts: Vec<usize> = (0..=train.len() - l).step_by(config.stride).collect();
    let d = config.model.latent;
    let mut log = Vec::with_capacity(config.epochs);
    let clock = Instant::now();

    for epoch in 1..=config.epochs {
        starts.shuffle(&mut rng);
        let mut sums = [0.0f64; 5];
        for batch in starts.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let store = model.params();
            let mut losses = Vec::with_capacity(batch.len());
            for &s in batch {
                let noise = draw_noise(&mut rng, l, d);
                let (loss, v) = model.loss_on_tape(&mut tape, store, &train[s..s + l], &noise)?;
                for (acc, var) in sums.iter_mut().zip([loss, v.elbo, v.recon_x, v.recon_y, v.kl]) {
                    *acc += tape.scalar(var).as_f64();
                }
                losses.push(loss);
            }
            let cat = tape.concat(&losses);
            let sum = tape.sum(cat);
            let mean = tape.scale(sum, T::one() / T::lit(batch.len() as f64));
            let grads = tape.backward(mean)?;
            model.params_mut().accumulate(&tape, &grads);
            adam.step(model.params_mut());
        }
        let per_step = (starts.len() * l) as f64;
        let (val_euler_mse, val_geodesic) = filter_metrics(&model, val)?;
        let entry = DvbfEpochLog {
            epoch,
            train_loss: sums[0] / per_step,
            train_elbo: sums[1] / per_step,
            train_recon_x: sums[2] / per_step,
            train_recon_y: sums[3] / per_step,
            train_kl: sums[4] / per_step,
            val_elbo: validation.elbo(&model, val, l)?,
            val_euler_mse,
            val_euler_rmse: val_euler_mse.sqrt(),
            val_geodesic,
            wall_seconds: clock.elapsed().as_secs_f64(),
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok((model, log))
}
