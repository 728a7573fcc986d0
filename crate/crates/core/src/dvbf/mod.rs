//! Fusion deep variational Bayes filter.
//!
//! Each sensor has its own recognition network producing a diagonal Gaussian
//! over the latent state. Their product is the measurement factor, which is
//! fused with a learned Gaussian transition to form the filtering posterior:
//!
//! ```text
//! q(z_t | z_{t-1}, x_t, u_t) ∝ q_meas(z_t | x_t) q_trans(z_t | z_{t-1}, u_t)
//! q_meas = prod_i N(mu_i(x_t^i), sigma_i(x_t^i))
//! ```
//!
//! Training maximizes reconstruction of the sensor readings and of the 6D
//! pose minus the KL between posterior and transition prior, with a small
//! penalty on the per-sensor means. Inference propagates posterior means.

mod gaussian;
pub mod linear;
mod model;
mod train;

#[cfg(test)]
mod tests;

pub use gaussian::{fuse_gaussians, kl_diag, DiagGaussian};
pub use model::{
    draw_noise, DvbfConfig, DvbfModel, ElboTerms, ElboVars, FilterOutput, FilterState, PosteriorStep,
    CONTROL_DIM, SIGMA_FLOOR,
};
pub use train::{
    filter_metrics, filter_series, moving_average, train_dvbf, train_dvbf_with, DvbfEpochLog,
    DvbfTrainConfig,
};
