//! Windowed LSTM regressor: the most recent `window` sensor frames are run
//! through a single LSTM cell from a zero state and the final hidden vector
//! is read out as a 6D rotation, decoded by Gram-Schmidt.
//!
//! Gates are elementwise vectors:
//!
//! ```text
//! f, i, o = sigmoid(W_{f,i,o} [x_t; h_{t-1}] + b_{f,i,o})
//! c~      = tanh(W_c [x_t; h_{t-1}] + b_c)
//! c_t     = c_{t-1} * f + c~ * i
//! h_t     = o * tanh(c_t)
//! ```

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::nn::Dense;
use crate::diffcore::persist;
use crate::diffcore::{Adam, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::real::Real;
use crate::rotation::{self, rotation_to_sixd, sixd_to_rotation, Rotation, SixD};
use crate::simkit::{Sample, SensorFrame, Standardization};

/// Cell memory and output for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellState<T> {
    pub c: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Real> LstmCellState<T> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            c: vec![T::zero(); hidden],
            h: vec![T::zero(); hidden],
        }
    }
}

/// Architecture of an [`LstmRegressor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmConfig {
    pub hidden: usize,
    pub window: usize,
    pub n_sensors: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            window: 5,
            n_sensors: 4,
        }
    }
}

/// Optimization settings for [`train_lstm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmTrainConfig {
    pub model: LstmConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for LstmTrainConfig {
    fn default() -> Self {
        Self {
            model: LstmConfig::default(),
            epochs: 30,
            batch_size: 64,
            lr: 1e-3,
            seed: 1,
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean squared error in 6D space over the training windows.
    pub train_loss: f64,
    pub val_sixd_mse: f64,
    /// Mean over axes of the per-axis Euler mean squared error (rad^2).
    pub val_euler_mse: f64,
    pub val_euler_rmse: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmRegressor<T> {
    config: LstmConfig,
    params: ParamStore<T>,
    gate_w: ParamId,
    gate_b: ParamId,
    head: Dense,
    stats: Standardization,
}

/// Cell memory and output as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct CellVars {
    pub c: Var,
    pub h: Var,
}

impl<T: Real> LstmRegressor<T> {
    /// Xavier-initialized weights, zero biases except the forget gate (+1).
    pub fn new(config: LstmConfig, stats: Standardization, seed: u64) -> Result<Self> {
        if config.hidden == 0 || config.window == 0 || config.n_sensors == 0 {
            return Err(Error::InvalidConfig("LSTM sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let h = config.hidden;
        let d = config.n_sensors * 3;
        let gate_w = params.xavier("gates.w", 4 * h, d + h, &mut rng)?;
        let mut bias = vec![T::zero(); 4 * h];
        bias[..h].iter_mut().for_each(|b| *b = T::one());
        let gate_b = params.add("gates.b", 4 * h, 1, bias)?;
        let head = Dense::new(&mut params, "head", h, 6, &mut rng)?;
        Ok(Self {
            config,
            params,
            gate_w,
            gate_b,
            head,
            stats,
        })
    }

    pub fn config(&self) -> LstmConfig {
        self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn gate_weight_id(&self) -> ParamId {
        self.gate_w
    }

    pub fn gate_bias_id(&self) -> ParamId {
        self.gate_b
    }

    pub fn stats(&self) -> &Standardization {
        &self.stats
    }

    pub fn input_dim(&self) -> usize {
        self.config.n_sensors * 3
    }

    /// [`Self::cell`] on a tape, reading the gate parameters from `store`.
    pub fn cell_on_tape(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        prev: &CellVars,
        x: Var,
    ) -> Result<CellVars> {
        let h = self.config.hidden;
        let w = tape.param(store, self.gate_w);
        let b = tape.param(store, self.gate_b);
        let xh = tape.concat(&[x, prev.h]);
        let wx = tape.matvec(w, xh)?;
        let z = tape.add(wx, b)?;
        let zf = tape.slice(z, 0, h)?;
        let zi = tape.slice(z, h, h)?;
        let zo = tape.slice(z, 2 * h, h)?;
        let zc = tape.slice(z, 3 * h, h)?;
        let f = tape.sigmoid(zf);
        let i = tape.sigmoid(zi);
        let o = tape.sigmoid(zo);
        let cand = tape.tanh(zc);
        let keep = tape.mul(prev.c, f)?;
        let write = tape.mul(cand, i)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok(CellVars { c, h })
    }

    /// One cell update.
    pub fn cell(&self, prev: &LstmCellState<T>, x: &[T]) -> Result<LstmCellState<T>> {
        let hd = self.config.hidden;
        if prev.c.len() != hd || prev.h.len() != hd || x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "lstm_cell",
                detail: format!(
                    "state {}/{} and input {} vs hidden {hd}, input {}",
                    prev.c.len(),
                    prev.h.len(),
                    x.len(),
                    self.input_dim()
                ),
            });
        }
        let mut tape = Tape::new();
        let state = CellVars {
            c: tape.constant(prev.c.clone()),
            h: tape.constant(prev.h.clone()),
        };
        let xv = tape.constant(x.to_vec());
        let next = self.cell_on_tape(&mut tape, &self.params, &state, xv)?;
        Ok(LstmCellState {
            c: tape.value(next.c).to_vec(),
            h: tape.value(next.h).to_vec(),
        })
    }

    /// Builds the raw 6D head output for a window of standardized frames.
    fn forward_on_tape(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        window: &[&SensorFrame],
    ) -> Result<Var> {
        if window.len() != self.config.window {
            return Err(Error::ShapeMismatch {
                op: "lstm_predict",
                detail: format!("window of {} frames, expected {}", window.len(), self.config.window),
            });
        }
        let zeros = vec![T::zero(); self.config.hidden];
        let mut state = CellVars {
            c: tape.constant(zeros.clone()),
            h: tape.constant(zeros),
        };
        for frame in window {
            if frame.values.len() != self.input_dim() {
                return Err(Error::ShapeMismatch {
                    op: "lstm_predict",
                    detail: format!("frame of {} values, expected {}", frame.values.len(), self.input_dim()),
                });
            }
            let x = tape.constant(frame.values.iter().map(|v| T::lit(*v)).collect());
            state = self.cell_on_tape(tape, store, &state, x)?;
        }
        self.head.forward(tape, store, state.h)
    }

    /// Raw 6D output for a window (chronological order).
    pub fn predict_sixd(&self, window: &[&SensorFrame]) -> Result<SixD<T>> {
        let mut tape = Tape::new();
        let out = self.forward_on_tape(&mut tape, &self.params, window)?;
        SixD::from_slice(tape.value(out))
    }

    pub fn predict(&self, window: &[&SensorFrame]) -> Result<Rotation<T>> {
        let v = self.predict_sixd(window)?;
        sixd_to_rotation(&v).map_err(|e| Error::EstimationFailed(e.to_string()))
    }

    /// Predictions for every sample that has a full window behind it, i.e.
    /// for `samples[window - 1..]`.
    pub fn predict_series(&self, samples: &[Sample]) -> Result<Vec<Rotation<T>>> {
        let w = self.config.window;
        if samples.len() < w {
            return Ok(Vec::new());
        }
        samples
            .windows(w)
            .map(|win| {
                let frames: Vec<&SensorFrame> = win.iter().map(|s| &s.x).collect();
                self.predict(&frames)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut meta = KvDoc::new();
        meta.set("kind", "lstm");
        meta.set("hidden", self.config.hidden);
        meta.set("window", self.config.window);
        meta.set("n_sensors", self.config.n_sensors);
        meta.set("dataset_id", self.stats.fingerprint());
        self.stats.to_kv(&mut meta);
        persist::write_model(&meta, &self.params)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (meta, params) = persist::read_model::<T>(text)?;
        if meta.get("kind") != Some("lstm") {
            return Err(Error::Format("model file is not an LSTM model".into()));
        }
        let config = LstmConfig {
            hidden: meta.parse_value("hidden")?,
            window: meta.parse_value("window")?,
            n_sensors: meta.parse_value("n_sensors")?,
        };
        let find = |n: &str| {
            params
                .find(n)
                .ok_or_else(|| Error::Format(format!("missing parameter {n}")))
        };
        let gate_w = find("gates.w")?;
        let gate_b = find("gates.b")?;
        let head = Dense::bind(&params, "head")?;
        let h = config.hidden;
        if params.get(gate_w).shape() != (4 * h, config.n_sensors * 3 + h) || head.outputs != 6 {
            return Err(Error::Format("LSTM parameter shapes do not match metadata".into()));
        }
        Ok(Self {
            config,
            params,
            gate_w,
            gate_b,
            head,
            stats: Standardization::from_kv(&meta)?,
        })
    }
}

fn sixd_target<T: Real>(y: &crate::Rotation) -> Vec<T> {
    rotation_to_sixd(y).0.iter().map(|v| T::lit(*v)).collect()
}

/// Validation metrics of a model over `samples` (windows ending at each
/// sample with enough history).
pub fn validation_metrics<T: Real>(model: &LstmRegressor<T>, samples: &[Sample]) -> Result<(f64, f64)> {
    let w = model.config.window;
    let mut sixd_se = 0.0;
    let mut euler_se = 0.0;
    let mut n = 0usize;
    for win in samples.windows(w) {
        let frames: Vec<&SensorFrame> = win.iter().map(|s| &s.x).collect();
        let target = &win[w - 1].y;
        let raw = model.predict_sixd(&frames)?;
        let t6 = rotation_to_sixd(target);
        sixd_se += raw
            .0
            .iter()
            .zip(t6.0)
            .map(|(a, b)| (a.as_f64() - b).powi(2))
            .sum::<f64>()
            / 6.0;
        let pred = sixd_to_rotation(&raw).map_err(|e| Error::EstimationFailed(e.to_string()))?;
        let pred = rotation::Rotation::from_row_major(&pred.to_row_major().map(|v| v.as_f64()));
        euler_se += rotation::euler_error(&pred, target).iter().map(|e| e * e).sum::<f64>() / 3.0;
        n += 1;
    }
    let n = n.max(1) as f64;
    Ok((sixd_se / n, euler_se / n))
}

/// Trains on sliding windows of `train`, reporting validation metrics on
/// `val` after every epoch.
pub fn train_lstm<T: Real>(
    train: &[Sample],
    val: &[Sample],
    stats: &Standardization,
    config: &LstmTrainConfig,
) -> Result<(LstmRegressor<T>, Vec<EpochLog>)> {
    train_lstm_with(train, val, stats, config, |_| {})
}

/// [`train_lstm`] with a callback invoked after each epoch.
pub fn train_lstm_with<T: Real>(
    train: &[Sample],
    val: &[Sample],
    stats: &Standardization,
    config: &LstmTrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(LstmRegressor<T>, Vec<EpochLog>)> {
    let w = config.model.window;
    if train.len() < w + 1 {
        return Err(Error::InvalidConfig(format!(
            "training split needs at least {} steps",
            w + 1
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let mut model = LstmRegressor::<T>::new(config.model, stats.clone(), config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let adam = Adam::with_lr(T::lit(config.lr));
    let mut order: Vec<usize> = (w - 1..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let start = Instant::now();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let store = &model.params;
            let mut losses = Vec::with_capacity(batch.len());
            for &end in batch {
                let frames: Vec<&SensorFrame> = train[end + 1 - w..=end].iter().map(|s| &s.x).collect();
                let out = model.forward_on_tape(&mut tape, store, &frames)?;
                let target = tape.constant(sixd_target(&train[end].y));
                let diff = tape.sub(out, target)?;
                let sq = tape.square(diff);
                losses.push(tape.sum(sq));
            }
            let cat = tape.concat(&losses);
            let sum = tape.sum(cat);
            let loss = tape.scale(sum, T::one() / T::lit((6 * batch.len()) as f64));
            total += tape.scalar(sum).as_f64();
            let grads = tape.backward(loss)?;
            model.params.accumulate(&tape, &grads);
            adam.step(&mut model.params);
        }
        let (val_sixd_mse, val_euler_mse) = if val.len() >= w {
            validation_metrics(&model, val)?
        } else {
            (f64::NAN, f64::NAN)
        };
        let entry = EpochLog {
            epoch,
            train_loss: total / (6 * order.len()) as f64,
            val_sixd_mse,
            val_euler_mse,
            val_euler_rmse: val_euler_mse.sqrt(),
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok((model, log))
}
