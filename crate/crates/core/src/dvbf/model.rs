use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffcore::nn::Mlp;
use crate::diffcore::{persist, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::real::Real;
use crate::rotation::{rotation_to_sixd, sixd_to_rotation, Rotation, SixD};
use crate::simkit::{Sample, SensorFrame, Standardization};
use crate::EulerAngles;

use super::gaussian::{fuse_on_tape, kl_on_tape, log_density_on_tape, DiagGaussian, GaussVar};

/// Dimension of the control input (target Euler angles).
pub const CONTROL_DIM: usize = 3;

/// Added to every softplus standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// Architecture and penalty weight of a [`DvbfModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvbfConfig {
    pub latent: usize,
    pub hidden: usize,
    pub n_sensors: usize,
    /// Weight of the penalty keeping per-sensor encoder means near zero.
    pub alpha: f64,
}

impl Default for DvbfConfig {
    fn default() -> Self {
        Self {
            latent: 8,
            hidden: 32,
            n_sensors: 4,
            alpha: 1e-3,
        }
    }
}

/// Result of one filtering update.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStep<T> {
    pub posterior: DiagGaussian<T>,
    pub prior: DiagGaussian<T>,
    pub measurement: DiagGaussian<T>,
    pub per_sensor: Vec<DiagGaussian<T>>,
}

/// ELBO of one sequence and its parts (sums over steps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms<T> {
    pub elbo: T,
    pub recon_x: T,
    pub recon_y: T,
    pub kl: T,
    /// `sum_t sum_i |mu_i(x_t)|^2` over per-sensor encoder means.
    pub penalty: T,
}

/// Online filter state for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState<T> {
    pub posterior: DiagGaussian<T>,
    pub steps: usize,
    pub stats: Standardization,
}

/// Pose estimate from the decoded posterior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput<T> {
    pub pose: Rotation<T>,
    /// Decoder distribution over the 6D encoding of the pose.
    pub pose_uncertainty: DiagGaussian<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvbfModel<T> {
    config: DvbfConfig,
    params: ParamStore<T>,
    enc: Vec<Mlp>,
    init: Mlp,
    trans: Mlp,
    dec_x: Vec<Mlp>,
    dec_y: Mlp,
    stats: Standardization,
}

pub(crate) struct StepVars {
    pub posterior: GaussVar,
    pub prior: GaussVar,
    pub measurement: GaussVar,
    pub per_sensor: Vec<GaussVar>,
}

/// ELBO terms of a sequence as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct ElboVars {
    pub elbo: Var,
    pub recon_x: Var,
    pub recon_y: Var,
    pub kl: Var,
    pub penalty: Var,
}

/// Standard normal draws for a sequence: one latent-sized vector per step.
pub fn draw_noise<T: Real, R: Rng + ?Sized>(rng: &mut R, steps: usize, latent: usize) -> Vec<Vec<T>> {
    (0..steps)
        .map(|_| {
            (0..latent)
                .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect()
}

fn lits<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|x| T::lit(*x)).collect()
}

fn gaussian_head<T: Real>(tape: &mut Tape<T>, out: Var, d: usize) -> Result<GaussVar> {
    let mu = tape.slice(out, 0, d)?;
    let raw = tape.slice(out, d, d)?;
    let sp = tape.softplus(raw);
    let sigma = tape.offset(sp, T::lit(SIGMA_FLOOR));
    Ok(GaussVar { mu, sigma })
}

fn estimation_failed(e: Error) -> Error {
    Error::EstimationFailed(e.to_string())
}

impl<T: Real> DvbfModel<T> {
    pub fn new(config: DvbfConfig, stats: Standardization, seed: u64) -> Result<Self> {
        if config.latent == 0 || config.hidden == 0 || config.n_sensors == 0 {
            return Err(Error::InvalidConfig("DVBF sizes must be positive".into()));
        }
        if !(config.alpha >= 0.0 && config.alpha.is_finite()) {
            return Err(Error::InvalidConfig("alpha must be finite and >= 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (d, h, n) = (config.latent, config.hidden, config.n_sensors);
        let enc = (0..n)
            .map(|i| Mlp::new(&mut params, &format!("enc{i}"), &[3, h, 2 * d], &mut rng))
            .collect::<Result<_>>()?;
        let init = Mlp::new(&mut params, "init", &[3 * n, h, 2 * d], &mut rng)?;
        let trans = Mlp::new(&mut params, "trans", &[d + CONTROL_DIM, h, h, 2 * d], &mut rng)?;
        let dec_x = (0..n)
            .map(|i| Mlp::new(&mut params, &format!("dec_x{i}"), &[d, h, 6], &mut rng))
            .collect::<Result<_>>()?;
        let dec_y = Mlp::new(&mut params, "dec_y", &[d, h, 12], &mut rng)?;
        Ok(Self {
            config,
            params,
            enc,
            init,
            trans,
            dec_x,
            dec_y,
            stats,
        })
    }

    pub fn config(&self) -> DvbfConfig {
        self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn stats(&self) -> &Standardization {
        &self.stats
    }

    pub fn latent(&self) -> usize {
        self.config.latent
    }

    fn frame_var(&self, tape: &mut Tape<T>, x: &SensorFrame) -> Result<Var> {
        let want = 3 * self.config.n_sensors;
        if x.values.len() != want {
            return Err(Error::ShapeMismatch {
                op: "dvbf_frame",
                detail: format!("frame of {} values, expected {want}", x.values.len()),
            });
        }
        Ok(tape.constant(lits(&x.values)))
    }

    fn latent_var(&self, tape: &mut Tape<T>, z: &[T]) -> Result<Var> {
        if z.len() != self.config.latent {
            return Err(Error::DimensionMismatch {
                expected: self.config.latent,
                got: z.len(),
            });
        }
        Ok(tape.constant(z.to_vec()))
    }

    fn measurement(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        frame: Var,
    ) -> Result<(Vec<GaussVar>, GaussVar)> {
        let d = self.config.latent;
        let per_sensor = self
            .enc
            .iter()
            .enumerate()
            .map(|(i, net)| {
                let xi = tape.slice(frame, 3 * i, 3)?;
                let out = net.forward(tape, store, xi)?;
                gaussian_head(tape, out, d)
            })
            .collect::<Result<Vec<_>>>()?;
        let fused = fuse_on_tape(tape, &per_sensor)?;
        Ok((per_sensor, fused))
    }

    /// `trans(z, u)`, parameterized as a residual update of `z`.
    fn transition(&self, tape: &mut Tape<T>, store: &ParamStore<T>, z: Var, u: Var) -> Result<GaussVar> {
        let d = self.config.latent;
        let zu = tape.concat(&[z, u]);
        let out = self.trans.forward(tape, store, zu)?;
        let g = gaussian_head(tape, out, d)?;
        let mu = tape.add(z, g.mu)?;
        Ok(GaussVar { mu, sigma: g.sigma })
    }

    fn initial(&self, tape: &mut Tape<T>, store: &ParamStore<T>, frame: Var) -> Result<GaussVar> {
        let out = self.init.forward(tape, store, frame)?;
        gaussian_head(tape, out, self.config.latent)
    }

    fn decode_y(&self, tape: &mut Tape<T>, store: &ParamStore<T>, z: Var) -> Result<GaussVar> {
        let out = self.dec_y.forward(tape, store, z)?;
        gaussian_head(tape, out, 6)
    }

    pub(crate) fn step_on_tape(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        prev_z: Var,
        frame: Var,
        u: Var,
    ) -> Result<StepVars> {
        let (per_sensor, measurement) = self.measurement(tape, store, frame)?;
        let prior = self.transition(tape, store, prev_z, u)?;
        let posterior = fuse_on_tape(tape, &[measurement, prior])?;
        Ok(StepVars {
            posterior,
            prior,
            measurement,
            per_sensor,
        })
    }

    /// Builds the sequence ELBO with the given reparameterization noise.
    pub fn elbo_on_tape(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        seq: &[Sample],
        noise: &[Vec<T>],
    ) -> Result<ElboVars> {
        let d = self.config.latent;
        if seq.is_empty() {
            return Err(Error::InvalidConfig("ELBO needs at least one step".into()));
        }
        if noise.len() != seq.len() || noise.iter().any(|e| e.len() != d) {
            return Err(Error::ShapeMismatch {
                op: "elbo_noise",
                detail: format!("need {} vectors of length {d}", seq.len()),
            });
        }
        let mut recon_x = Vec::new();
        let mut recon_y = Vec::new();
        let mut kls = Vec::new();
        let mut penalty = Vec::new();
        let mut prev_z: Option<Var> = None;
        for (s, eps) in seq.iter().zip(noise) {
            let frame = self.frame_var(tape, &s.x)?;
            let (posterior, prior, per_sensor) = match prev_z {
                None => {
                    let (per_sensor, _) = self.measurement(tape, store, frame)?;
                    let post = self.initial(tape, store, frame)?;
                    let prior = GaussVar::constant(tape, &DiagGaussian::standard(d));
                    (post, prior, per_sensor)
                }
                Some(z) => {
                    let u = tape.constant(lits(&s.u.to_array()));
                    let step = self.step_on_tape(tape, store, z, frame, u)?;
                    (step.posterior, step.prior, step.per_sensor)
                }
            };
            for g in &per_sensor {
                penalty.push(tape.dot(g.mu, g.mu)?);
            }
            kls.push(kl_on_tape(tape, posterior, prior)?);

            let e = tape.constant(eps.clone());
            let spread = tape.mul(posterior.sigma, e)?;
            let z = tape.add(posterior.mu, spread)?;

            for (i, net) in self.dec_x.iter().enumerate() {
                let out = net.forward(tape, store, z)?;
                let g = gaussian_head(tape, out, 3)?;
                let xi = tape.slice(frame, 3 * i, 3)?;
                recon_x.push(log_density_on_tape(tape, g, xi)?);
            }
            let gy = self.decode_y(tape, store, z)?;
            let y = tape.constant(lits(&rotation_to_sixd(&s.y).0));
            recon_y.push(log_density_on_tape(tape, gy, y)?);
            prev_z = Some(z);
        }
        let mut total = |parts: &[Var]| {
            let cat = tape.concat(parts);
            tape.sum(cat)
        };
        let recon_x = total(&recon_x);
        let recon_y = total(&recon_y);
        let kl = total(&kls);
        let penalty = total(&penalty);
        let recon = tape.add(recon_x, recon_y)?;
        let elbo = tape.sub(recon, kl)?;
        Ok(ElboVars {
            elbo,
            recon_x,
            recon_y,
            kl,
            penalty,
        })
    }

    /// `-ELBO + alpha * penalty` for one sequence.
    pub(crate) fn loss_on_tape(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        seq: &[Sample],
        noise: &[Vec<T>],
    ) -> Result<(Var, ElboVars)> {
        let v = self.elbo_on_tape(tape, store, seq, noise)?;
        let neg = tape.neg(v.elbo);
        let pen = tape.scale(v.penalty, T::lit(self.config.alpha));
        Ok((tape.add(neg, pen)?, v))
    }

    /// Evidence lower bound of `seq` with frozen reparameterization noise
    /// (`noise[t]` is the standard normal draw used at step `t`).
    pub fn elbo(&self, seq: &[Sample], noise: &[Vec<T>]) -> Result<ElboTerms<T>> {
        let mut tape = Tape::new();
        let v = self.elbo_on_tape(&mut tape, &self.params, seq, noise)?;
        Ok(ElboTerms {
            elbo: tape.scalar(v.elbo),
            recon_x: tape.scalar(v.recon_x),
            recon_y: tape.scalar(v.recon_y),
            kl: tape.scalar(v.kl),
            penalty: tape.scalar(v.penalty),
        })
    }

    /// Mean over the batch of `-ELBO + alpha * sum_t sum_i |mu_i(x_t)|^2`.
    pub fn constrained_loss(&self, batch: &[(&[Sample], &[Vec<T>])]) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        let mut total = T::zero();
        for (seq, noise) in batch {
            let mut tape = Tape::new();
            let (loss, _) = self.loss_on_tape(&mut tape, &self.params, seq, noise)?;
            total = total + tape.scalar(loss);
        }
        Ok(total / T::lit(batch.len() as f64))
    }

    /// Measurement fusion and transition from a given previous latent.
    pub fn posterior_step(&self, prev_z: &[T], x: &SensorFrame, u: &EulerAngles) -> Result<PosteriorStep<T>> {
        let mut tape = Tape::new();
        let z = self.latent_var(&mut tape, prev_z)?;
        let frame = self.frame_var(&mut tape, x)?;
        let u = tape.constant(lits(&u.to_array()));
        let step = self.step_on_tape(&mut tape, &self.params, z, frame, u)?;
        Ok(PosteriorStep {
            posterior: step.posterior.values(&tape),
            prior: step.prior.values(&tape),
            measurement: step.measurement.values(&tape),
            per_sensor: step.per_sensor.iter().map(|g| g.values(&tape)).collect(),
        })
    }

    /// Starts a stream from the first standardized frame.
    pub fn filter_init(&self, x1: &SensorFrame) -> Result<FilterState<T>> {
        let mut tape = Tape::new();
        let frame = self.frame_var(&mut tape, x1)?;
        let g = self.initial(&mut tape, &self.params, frame)?;
        Ok(FilterState {
            posterior: g.values(&tape),
            steps: 1,
            stats: self.stats.clone(),
        })
    }

    /// Decodes the pose distribution at latent `z`.
    pub fn decode_pose(&self, z: &[T]) -> Result<FilterOutput<T>> {
        let mut tape = Tape::new();
        let zv = self.latent_var(&mut tape, z)?;
        let g = self.decode_y(&mut tape, &self.params, zv)?;
        let pose_uncertainty = g.values(&tape);
        let mean = SixD::from_slice(&pose_uncertainty.mu)?;
        let pose = sixd_to_rotation(&mean).map_err(estimation_failed)?;
        Ok(FilterOutput {
            pose,
            pose_uncertainty,
        })
    }

    /// Advances the stream by one frame, propagating the posterior mean.
    pub fn filter_step(
        &self,
        state: &mut FilterState<T>,
        x: &SensorFrame,
        u: &EulerAngles,
    ) -> Result<FilterOutput<T>> {
        let mut tape = Tape::new();
        let z = self.latent_var(&mut tape, &state.posterior.mu)?;
        let frame = self.frame_var(&mut tape, x)?;
        let uv = tape.constant(lits(&u.to_array()));
        let step = self.step_on_tape(&mut tape, &self.params, z, frame, uv)?;
        let g = self.decode_y(&mut tape, &self.params, step.posterior.mu)?;
        state.posterior = step.posterior.values(&tape);
        state.steps += 1;
        let pose_uncertainty = g.values(&tape);
        let mean = SixD::from_slice(&pose_uncertainty.mu)?;
        let pose = sixd_to_rotation(&mean).map_err(estimation_failed)?;
        Ok(FilterOutput {
            pose,
            pose_uncertainty,
        })
    }

    pub fn to_text(&self) -> String {
        let mut meta = KvDoc::new();
        meta.set("kind", "dvbf");
        meta.set("latent", self.config.latent);
        meta.set("hidden", self.config.hidden);
        meta.set("n_sensors", self.config.n_sensors);
        meta.set("alpha", self.config.alpha);
        meta.set("dataset_id", self.stats.fingerprint());
        self.stats.to_kv(&mut meta);
        persist::write_model(&meta, &self.params)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (meta, params) = persist::read_model::<T>(text)?;
        if meta.get("kind") != Some("dvbf") {
            return Err(Error::Format("model file is not a DVBF model".into()));
        }
        let config = DvbfConfig {
            latent: meta.parse_value("latent")?,
            hidden: meta.parse_value("hidden")?,
            n_sensors: meta.parse_value("n_sensors")?,
            alpha: meta.parse_value("alpha")?,
        };
        // Rebuild a fresh model for the layout, then check every shape matches.
        let stats = Standardization::from_kv(&meta)?;
        let mut model = Self::new(config, stats, 0)?;
        if model.params.len() != params.len() {
            return Err(Error::Format("DVBF parameter count does not match metadata".into()));
        }
        for (fresh, loaded) in model.params.iter().zip(params.iter()) {
            if fresh.name() != loaded.name() || fresh.shape() != loaded.shape() {
                return Err(Error::Format(format!(
                    "parameter {} does not match the DVBF layout",
                    loaded.name()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }
}
