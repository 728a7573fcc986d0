use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::linear::LinearGaussian;
use super::*;
use crate::diffcore::{gradient_check, GradCheckOptions, ParamStore, Tape};
use crate::error::Error;
use crate::rotation::geodesic_angle;
use crate::simkit::{generate_dataset, Dataset, DatasetConfig, SensorFrame, Standardization};
use crate::EulerAngles;

fn g1(mu: f64, sigma: f64) -> DiagGaussian<f64> {
    DiagGaussian::new(vec![mu], vec![sigma]).unwrap()
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> DiagGaussian<f64> {
    DiagGaussian::new(
        (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        (0..d).map(|_| rng.gen_range(0.2..2.5)).collect(),
    )
    .unwrap()
}

fn unit_stats() -> Standardization {
    Standardization {
        mean: vec![0.0; 12],
        std: vec![1.0; 12],
    }
}

fn model_with(latent: usize, hidden: usize, seed: u64) -> DvbfModel<f64> {
    let cfg = DvbfConfig {
        latent,
        hidden,
        ..DvbfConfig::default()
    };
    DvbfModel::new(cfg, unit_stats(), seed).unwrap()
}

fn small_dataset() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        generate_dataset(&DatasetConfig {
            n_steps: 1_500,
            seed: 4,
            ..DatasetConfig::default()
        })
        .unwrap()
    })
}

fn quick_config(alpha: f64, epochs: usize) -> DvbfTrainConfig {
    DvbfTrainConfig {
        model: DvbfConfig {
            alpha,
            hidden: 16,
            ..DvbfConfig::default()
        },
        epochs,
        stride: 8,
        lr: 3e-3,
        val_sequences: 8,
        ..DvbfTrainConfig::default()
    }
}

fn trained_small() -> &'static (DvbfModel<f64>, Vec<DvbfEpochLog>) {
    static M: OnceLock<(DvbfModel<f64>, Vec<DvbfEpochLog>)> = OnceLock::new();
    M.get_or_init(|| {
        let ds = small_dataset();
        let (train, val, _) = ds.split();
        train_dvbf(train, val, &ds.stats, &quick_config(1e-3, 8)).unwrap()
    })
}

/// Normalized pointwise product of 1-D densities on a grid; returns (mean, std).
fn grid_product(components: &[DiagGaussian<f64>]) -> (f64, f64) {
    let lo = components.iter().map(|c| c.mu[0] - 12.0 * c.sigma[0]).fold(f64::INFINITY, f64::min);
    let hi = components.iter().map(|c| c.mu[0] + 12.0 * c.sigma[0]).fold(f64::NEG_INFINITY, f64::max);
    let n = 200_001;
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let log_p: Vec<f64> = xs
        .iter()
        .map(|x| components.iter().map(|c| c.log_density(&[*x]).unwrap()).sum())
        .collect();
    let top = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = log_p.iter().map(|l| (l - top).exp()).collect();
    let trapz = |f: &dyn Fn(usize) -> f64| {
        (0..n).map(|i| f(i) * if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).sum::<f64>() * h
    };
    let z = trapz(&|i| p[i]);
    let mean = trapz(&|i| p[i] * xs[i]) / z;
    let var = trapz(&|i| p[i] * (xs[i] - mean).powi(2)) / z;
    (mean, var.sqrt())
}

#[test]
fn single_component_is_unchanged() {
    let g = DiagGaussian::new(vec![0.3, -1.0], vec![0.5, 2.0]).unwrap();
    assert_eq!(fuse_gaussians(std::slice::from_ref(&g)).unwrap(), g);
}

#[test]
fn symmetric_pair_fuses_to_midpoint() {
    let f = fuse_gaussians(&[g1(1.0, 1.0), g1(3.0, 1.0)]).unwrap();
    assert!((f.mu[0] - 2.0).abs() < 1e-15);
    assert!((f.sigma[0] - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn fusion_matches_grid_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 1..=6 {
        for _ in 0..3 {
            let comps: Vec<_> = (0..n).map(|_| random_gaussian(&mut rng, 1)).collect();
            let f = fuse_gaussians(&comps).unwrap();
            let (m, s) = grid_product(&comps);
            assert!((f.mu[0] - m).abs() < 1e-6, "{} vs {m}", f.mu[0]);
            assert!((f.sigma[0] - s).abs() < 1e-6, "{} vs {s}", f.sigma[0]);
        }
    }
}

#[test]
fn fusion_adds_precisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let comps: Vec<_> = (0..n).map(|_| random_gaussian(&mut rng, 3)).collect();
        let f = fuse_gaussians(&comps).unwrap();
        for k in 0..3 {
            let sum: f64 = comps.iter().map(|c| c.sigma[k].powi(-2)).sum();
            assert!((f.sigma[k].powi(-2) - sum).abs() < 1e-12 * sum);
        }
    }
}

#[test]
fn fusion_is_associative() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let comps: Vec<_> = (0..5).map(|_| random_gaussian(&mut rng, 2)).collect();
        let flat = fuse_gaussians(&comps).unwrap();
        let left = fuse_gaussians(&comps[..2]).unwrap();
        let right = fuse_gaussians(&comps[2..]).unwrap();
        let nested = fuse_gaussians(&[left, right]).unwrap();
        for k in 0..2 {
            assert!((flat.mu[k] - nested.mu[k]).abs() < 1e-10);
            assert!((flat.sigma[k] - nested.sigma[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn fusion_and_kl_reject_bad_input() {
    let a = g1(0.0, 1.0);
    let b = DiagGaussian::standard(2);
    assert!(matches!(fuse_gaussians(&[a.clone(), b.clone()]), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(kl_diag(&a, &b), Err(Error::DimensionMismatch { .. })));
    assert!(fuse_gaussians::<f64>(&[]).is_err());
    assert!(DiagGaussian::new(vec![0.0], vec![0.0]).is_err());
    assert!(DiagGaussian::new(vec![f64::NAN], vec![1.0]).is_err());
}

#[test]
fn kl_closed_forms() {
    let s = DiagGaussian::<f64>::standard(4);
    assert_eq!(kl_diag(&s, &s).unwrap(), 0.0);
    let q = DiagGaussian::new(vec![0.7, -1.2, 0.0, 2.0], vec![1.0; 4]).unwrap();
    let want: f64 = q.mu.iter().map(|m| m * m / 2.0).sum();
    assert!((kl_diag(&q, &s).unwrap() - want).abs() < 1e-15);
    let mut near = q.clone();
    near.sigma[2] += 1e-3;
    assert!(kl_diag(&near, &q).unwrap() > 0.0);
    near = q.clone();
    near.mu[0] += 1e-3;
    assert!(kl_diag(&near, &q).unwrap() > 0.0);
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let q = random_gaussian(&mut rng, 3);
        let p = random_gaussian(&mut rng, 3);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let z: Vec<f64> = (0..3)
                .map(|k| q.mu[k] + q.sigma[k] * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let d = q.log_density(&z).unwrap() - p.log_density(&z).unwrap();
            sum += d;
            sq += d * d;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = kl_diag(&q, &p).unwrap();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }
}

/// Exact `log p(x_{1:T})` by Kalman filtering.
fn kalman_log_likelihood(m: &LinearGaussian, x: &[f64], u: &[f64]) -> f64 {
    let (mut mean, mut var) = (0.0, 1.0);
    let mut ll = 0.0;
    for t in 0..x.len() {
        if t > 0 {
            mean = m.a * mean + m.b * u[t];
            var = m.a * m.a * var + m.q * m.q;
        }
        let s = m.c * m.c * var + m.r * m.r;
        let innov = x[t] - m.c * mean;
        ll -= 0.5 * ((2.0 * std::f64::consts::PI * s).ln() + innov * innov / s);
        let gain = var * m.c / s;
        mean += gain * innov;
        var *= 1.0 - gain * m.c;
    }
    ll
}

fn random_linear(rng: &mut ChaCha8Rng) -> (LinearGaussian, Vec<f64>, Vec<f64>) {
    let m = LinearGaussian {
        a: rng.gen_range(-1.2..1.2),
        b: rng.gen_range(-1.0..1.0),
        c: rng.gen_range(0.3..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        q: rng.gen_range(0.1..1.5),
        r: rng.gen_range(0.1..1.5),
    };
    let t = rng.gen_range(1..=20);
    let u: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..t).map(|_| rng.gen_range(-3.0..3.0)).collect();
    (m, x, u)
}

#[test]
fn linear_gaussian_elbo_is_a_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let (m, x, u) = random_linear(&mut rng);
        let elbo = m.filtering_elbo(&x, &u).unwrap();
        let exact = kalman_log_likelihood(&m, &x, &u);
        assert!(elbo <= exact + 1e-9, "{elbo} > {exact}");
    }
}

#[test]
fn linear_gaussian_elbo_is_tight_for_one_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let (m, x, u) = random_linear(&mut rng);
        let elbo = m.filtering_elbo(&x[..1], &u[..1]).unwrap();
        let exact = kalman_log_likelihood(&m, &x[..1], &u[..1]);
        assert!((elbo - exact).abs() < 1e-9);
    }
}

#[test]
fn reparameterized_gradient_matches_analytic() {
    let (mu, sigma) = (0.7, 1.3);
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();

    let mut store = ParamStore::new();
    let mu_id = store.add("mu", 1, 1, vec![mu]).unwrap();
    let sigma_id = store.add("sigma", 1, 1, vec![sigma]).unwrap();
    let mut tape = Tape::new();
    let m = tape.param(&store, mu_id);
    let s = tape.param(&store, sigma_id);
    let ones = tape.constant(vec![1.0; n]);
    let e = tape.constant(eps.clone());
    let mv = tape.matvec(ones, m).unwrap();
    let sv = tape.matvec(e, s).unwrap();
    let z = tape.add(mv, sv).unwrap();
    let z2 = tape.square(z);
    let total = tape.sum(z2);
    let loss = tape.scale(total, 1.0 / n as f64);
    let grads = tape.backward(loss).unwrap();
    let gm = grads.wrt(m).unwrap()[0];
    let gs = grads.wrt(s).unwrap()[0];

    // per-sample gradient contributions give the standard errors
    let se = |f: &dyn Fn(f64) -> f64| {
        let vals: Vec<f64> = eps.iter().map(|e| f(*e)).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    let se_m = se(&|e| 2.0 * (mu + sigma * e));
    let se_s = se(&|e| 2.0 * (mu + sigma * e) * e);
    assert!((gm - 2.0 * mu).abs() < 3.0 * se_m, "{gm} (se {se_m})");
    assert!((gs - 2.0 * sigma).abs() < 3.0 * se_s, "{gs} (se {se_s})");
}

/// Sets the final-layer rows that produce raw sigmas to a constant.
fn force_sigma(model: &mut DvbfModel<f64>, prefix: &str, depth: usize, d: usize, raw: f64) {
    let store = model.params_mut();
    let w = store.find(&format!("{prefix}.{}.w", depth - 1)).unwrap();
    let b = store.find(&format!("{prefix}.{}.b", depth - 1)).unwrap();
    let cols = store.get(w).shape().1;
    store.get_mut(w).value_mut()[d * cols..].iter_mut().for_each(|v| *v = 0.0);
    store.get_mut(b).value_mut()[d..].iter_mut().for_each(|v| *v = raw);
}

fn frame(seed: u64) -> SensorFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SensorFrame {
        values: (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

fn close_rel(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-12))
}

#[test]
fn uninformative_sensors_leave_the_prior() {
    let mut model = model_with(8, 32, 1);
    for i in 0..4 {
        force_sigma(&mut model, &format!("enc{i}"), 2, 8, 1e6);
    }
    let z = vec![0.2; 8];
    let step = model.posterior_step(&z, &frame(1), &EulerAngles::new(0.1, -0.5, 0.3)).unwrap();
    assert!(close_rel(&step.posterior.mu, &step.prior.mu, 1e-3));
    assert!(close_rel(&step.posterior.sigma, &step.prior.sigma, 1e-3));
}

#[test]
fn flat_prior_leaves_the_measurement() {
    let mut model = model_with(8, 32, 2);
    force_sigma(&mut model, "trans", 3, 8, 1e6);
    let z = vec![-0.4; 8];
    let step = model.posterior_step(&z, &frame(2), &EulerAngles::new(0.0, -0.7, -1.0)).unwrap();
    assert!(close_rel(&step.posterior.mu, &step.measurement.mu, 1e-3));
    assert!(close_rel(&step.posterior.sigma, &step.measurement.sigma, 1e-3));
}

#[test]
fn posterior_equals_flat_fusion() {
    let model = model_with(8, 32, 3);
    for k in 0..20 {
        let z: Vec<f64> = frame(100 + k).values[..8].to_vec();
        let step = model.posterior_step(&z, &frame(k), &EulerAngles::new(0.3, -0.2, -1.5)).unwrap();
        let mut all = step.per_sensor.clone();
        all.push(step.prior.clone());
        let flat = fuse_gaussians(&all).unwrap();
        for d in 0..8 {
            assert!((flat.mu[d] - step.posterior.mu[d]).abs() < 1e-10);
            assert!((flat.sigma[d] - step.posterior.sigma[d]).abs() < 1e-10);
        }
    }
}

fn short_sequence(t: usize) -> Vec<crate::simkit::Sample> {
    small_dataset().samples[100..100 + t].to_vec()
}

#[test]
fn flat_decoders_reduce_elbo_to_initial_kl() {
    let mut model = model_with(8, 32, 4);
    let s = 1e6f64;
    for i in 0..4 {
        force_sigma(&mut model, &format!("dec_x{i}"), 2, 3, s);
    }
    force_sigma(&mut model, "dec_y", 2, 6, s);
    let seq = short_sequence(1);
    let noise = vec![vec![0.3; 8]];
    let terms = model.elbo(&seq, &noise).unwrap();
    let init = model.filter_init(&seq[0].x).unwrap().posterior;
    let kl = kl_diag(&init, &DiagGaussian::standard(8)).unwrap();
    let constant = -18.0 * (s.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln());
    assert!((terms.elbo - (constant - kl)).abs() < 1e-6, "{terms:?}");
    assert!((terms.kl - kl).abs() < 1e-12);
}

#[test]
fn elbo_is_deterministic_with_frozen_noise() {
    let model = model_with(8, 32, 5);
    let seq = short_sequence(10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = draw_noise(&mut rng, 10, 8);
    let a = model.elbo(&seq, &noise).unwrap();
    assert_eq!(a, model.elbo(&seq, &noise).unwrap());
    assert!((a.elbo - (a.recon_x + a.recon_y - a.kl)).abs() < 1e-9);
    assert!(model.elbo(&seq, &noise[..9]).is_err());
    assert!(model.elbo(&[], &[]).is_err());
}

#[test]
fn elbo_gradient_check() {
    let mut model = model_with(4, 8, 6);
    let seq = short_sequence(3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = draw_noise(&mut rng, 3, 4);
    let template = model.clone();
    let report = gradient_check(
        model.params_mut(),
        |tape, store| Ok(template.elbo_on_tape(tape, store, &seq, &noise)?.elbo),
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn constrained_loss_adds_the_penalty() {
    let seq = short_sequence(6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = draw_noise(&mut rng, 6, 8);
    let free = DvbfModel::<f64>::new(
        DvbfConfig {
            alpha: 0.0,
            ..DvbfConfig::default()
        },
        unit_stats(),
        7,
    )
    .unwrap();
    let terms = free.elbo(&seq, &noise).unwrap();
    assert_eq!(free.constrained_loss(&[(&seq, &noise)]).unwrap(), -terms.elbo);

    let model = model_with(8, 32, 7);
    let terms = model.elbo(&seq, &noise).unwrap();
    let loss = model.constrained_loss(&[(&seq, &noise), (&seq, &noise)]).unwrap();
    assert!((loss - (-terms.elbo + 1e-3 * terms.penalty)).abs() < 1e-12);
    assert!(terms.penalty > 0.0);
}

fn mean_encoder_norm(model: &DvbfModel<f64>, frames: &[crate::simkit::Sample]) -> f64 {
    let z = vec![0.0; model.latent()];
    let mut total = 0.0;
    let mut n = 0.0;
    for s in frames {
        let step = model.posterior_step(&z, &s.x, &s.u).unwrap();
        for g in &step.per_sensor {
            total += g.mu.iter().map(|m| m * m).sum::<f64>().sqrt();
            n += 1.0;
        }
    }
    total / n
}

#[test]
fn strong_penalty_shrinks_encoder_means() {
    let ds = small_dataset();
    let (train, val, _) = ds.split();
    let (free, _) = train_dvbf::<f64>(train, val, &ds.stats, &quick_config(0.0, 3)).unwrap();
    let (tight, _) = train_dvbf::<f64>(train, val, &ds.stats, &quick_config(1e3, 3)).unwrap();
    assert!(mean_encoder_norm(&tight, val) < mean_encoder_norm(&free, val));
}

#[test]
fn zero_epochs_returns_initial_model() {
    let ds = small_dataset();
    let (train, val, _) = ds.split();
    let cfg = quick_config(1e-3, 0);
    let (model, log) = train_dvbf::<f64>(train, val, &ds.stats, &cfg).unwrap();
    assert!(log.is_empty());
    let fresh = DvbfModel::<f64>::new(cfg.model, ds.stats.clone(), cfg.seed).unwrap();
    assert!(model.params().same_values(fresh.params()));
    assert!(train_dvbf::<f64>(&train[..10], val, &ds.stats, &cfg).is_err());
}

#[test]
fn training_improves_validation_elbo_and_is_deterministic() {
    let ds = small_dataset();
    let (train, val, _) = ds.split();
    let (model, log) = trained_small();
    assert_eq!(log.len(), 8);
    assert!(log[7].val_elbo > log[0].val_elbo, "{log:?}");
    assert!(log.iter().all(|e| e.val_elbo.is_finite() && e.val_euler_mse.is_finite()));
    let cfg = DvbfTrainConfig {
        epochs: 2,
        ..quick_config(1e-3, 8)
    };
    let (a, _) = train_dvbf::<f64>(train, val, &ds.stats, &cfg).unwrap();
    let (b, _) = train_dvbf::<f64>(train, val, &ds.stats, &cfg).unwrap();
    assert!(a.params().same_values(b.params()));
    assert!(!a.params().same_values(model.params()));
}

#[test]
fn moving_average_windows() {
    assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 2.5, 3.5]);
    assert!(moving_average(&[1.0], 5).is_empty());
}

#[test]
fn filter_init_is_total_and_deterministic() {
    let model = model_with(8, 32, 8);
    let zeros = SensorFrame::zeros(4);
    let a = model.filter_init(&zeros).unwrap();
    assert_eq!(a, model.filter_init(&zeros).unwrap());
    assert!(a.posterior.mu.iter().chain(&a.posterior.sigma).all(|v| v.is_finite()));
    assert!(a.posterior.sigma.iter().all(|s| *s > 0.0));
    assert!(model.filter_init(&SensorFrame::zeros(3)).is_err());
}

#[test]
fn filter_init_golden() {
    let model = model_with(8, 32, 1);
    let golden = SensorFrame {
        values: vec![
            0.6, -1.2, 0.3, 1.1, 0.0, -0.4, -0.9, 0.25, 1.7, -0.05, 0.8, -1.5,
        ],
    };
    let state = model.filter_init(&golden).unwrap();
    let want_mu = [
        -0.10544122720419274, -1.2758848015295081, 0.1893880291786648, -0.36696117345055745,
        -0.05486404753087745, -0.8994059297263268, 0.6068223074002363, 0.5985132268444692,
    ];
    let want_sigma = [
        0.6757048823477666, 0.6035410624795002, 0.44900735162508976, 0.41262432246306496,
        1.3107187471970463, 0.6042841803308938, 1.1095018941345505, 1.0379033142556668,
    ];
    assert!(close_rel(&state.posterior.mu, &want_mu, 1e-12));
    assert!(close_rel(&state.posterior.sigma, &want_sigma, 1e-12));
}

#[test]
fn constant_input_converges() {
    let (model, _) = trained_small();
    let ds = small_dataset();
    let s = &ds.samples[700];
    let mut state = model.filter_init(&s.x).unwrap();
    let mut prev = model.filter_step(&mut state, &s.x, &s.u).unwrap().pose;
    for k in 0..100 {
        let pose = model.filter_step(&mut state, &s.x, &s.u).unwrap().pose;
        if k >= 50 {
            assert!(geodesic_angle(&prev, &pose) < 1e-4, "step {k}");
        }
        prev = pose;
    }
}

#[test]
fn fusion_damps_a_single_sensor_spike() {
    let (model, _) = trained_small();
    let ds = small_dataset();
    let s = &ds.samples[900];
    let z = model.filter_init(&ds.samples[899].x).unwrap().posterior.mu;
    let clean = model.posterior_step(&z, &s.x, &s.u).unwrap();
    let mut spiked = s.x.clone();
    spiked.values[..3].iter_mut().for_each(|v| *v += 0.5);
    let hit = model.posterior_step(&z, &spiked, &s.u).unwrap();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let sensor_moved = dist(&hit.per_sensor[0].mu, &clean.per_sensor[0].mu);
    let posterior_moved = dist(&hit.posterior.mu, &clean.posterior.mu);
    let sigma_grew = hit.per_sensor[0].sigma.iter().zip(&clean.per_sensor[0].sigma).all(|(a, b)| a > b);
    assert!(sigma_grew || posterior_moved < sensor_moved, "{posterior_moved} vs {sensor_moved}");
}

#[test]
fn same_stream_twice_gives_identical_outputs() {
    let (model, _) = trained_small();
    let (_, _, test) = small_dataset().split();
    assert_eq!(filter_series(model, test).unwrap(), filter_series(model, test).unwrap());
}

#[test]
fn save_load_round_trip() {
    let (model, _) = trained_small();
    let text = model.to_text();
    let back = DvbfModel::<f64>::from_text(&text).unwrap();
    assert!(back.params().same_values(model.params()));
    assert_eq!((back.config(), back.stats()), (model.config(), model.stats()));
    assert_eq!(back.to_text(), text);
    assert!(DvbfModel::<f64>::from_text(&text.replace("kind = dvbf", "kind = lstm")).is_err());
    assert!(DvbfModel::<f64>::from_text(&text.replace("latent = 8", "latent = 6")).is_err());
}

#[test]
fn single_precision_filter_runs() {
    let model = DvbfModel::<f32>::new(DvbfConfig::default(), unit_stats(), 1).unwrap();
    let mut state = model.filter_init(&frame(3)).unwrap();
    let out = model.filter_step(&mut state, &frame(4), &EulerAngles::new(0.0, -0.5, -1.0)).unwrap();
    assert!(out.pose.is_valid(1e-5));
}

proptest! {
    #[test]
    fn kl_is_nonnegative(
        mq in prop::collection::vec(-5.0f64..5.0, 3),
        sq in prop::collection::vec(0.05f64..5.0, 3),
        mp in prop::collection::vec(-5.0f64..5.0, 3),
        sp in prop::collection::vec(0.05f64..5.0, 3),
    ) {
        let q = DiagGaussian::new(mq, sq).unwrap();
        let p = DiagGaussian::new(mp, sp).unwrap();
        prop_assert!(kl_diag(&q, &p).unwrap() >= 0.0);
        prop_assert_eq!(kl_diag(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn fusion_is_permutation_invariant(seed in 0u64..10_000, n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps: Vec<_> = (0..n).map(|_| random_gaussian(&mut rng, 2)).collect();
        let mut rev = comps.clone();
        rev.reverse();
        let a = fuse_gaussians(&comps).unwrap();
        let b = fuse_gaussians(&rev).unwrap();
        for k in 0..2 {
            prop_assert!((a.mu[k] - b.mu[k]).abs() < 1e-10);
            prop_assert!((a.sigma[k] - b.sigma[k]).abs() < 1e-10);
        }
    }
}

