//! One-dimensional linear-Gaussian state space model with a closed-form
//! expected ELBO, used to sanity-check the filtering bound.

use crate::error::{Error, Result};

use super::gaussian::{fuse_gaussians, kl_diag, DiagGaussian};

/// `z_1 ~ N(0, 1)`, `z_t = a z_{t-1} + b u_t + N(0, q^2)`, `x_t = c z_t + N(0, r^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussian {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
}

fn scalar(mu: f64, sigma: f64) -> DiagGaussian<f64> {
    DiagGaussian {
        mu: vec![mu],
        sigma: vec![sigma],
    }
}

impl LinearGaussian {
    /// Expected ELBO of `x` under the filtering-form posterior whose factors
    /// are exact: each step fuses the measurement likelihood `N(x_t / c, (r / c)^2)`
    /// with the prior (`N(0, 1)` first, the transition afterwards).
    ///
    /// Both the reconstruction and the KL terms are Gaussian expectations
    /// over the posterior marginals, so no sampling is involved.
    pub fn filtering_elbo(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        if x.is_empty() || x.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len().max(1),
                got: u.len(),
            });
        }
        if self.c == 0.0 || !(self.q > 0.0 && self.r > 0.0) {
            return Err(Error::InvalidConfig("need c != 0 and q, r > 0".into()));
        }
        let meas = |xt: f64| scalar(xt / self.c, self.r / self.c.abs());
        let recon = |xt: f64, m: f64, v: f64| {
            let e2 = (xt - self.c * m).powi(2) + self.c * self.c * v;
            -0.5 * (2.0 * std::f64::consts::PI * self.r * self.r).ln() - e2 / (2.0 * self.r * self.r)
        };

        let prior = DiagGaussian::standard(1);
        let post = fuse_gaussians(&[meas(x[0]), prior.clone()])?;
        let mut elbo = recon(x[0], post.mu[0], post.sigma[0].powi(2)) - kl_diag(&post, &prior)?;
        let (mut m, mut v) = (post.mu[0], post.sigma[0].powi(2));

        for t in 1..x.len() {
            // The fused mean is affine in z_{t-1}: alpha z + beta.
            let at = |z: f64| fuse_gaussians(&[meas(x[t]), scalar(self.a * z + self.b * u[t], self.q)]);
            let f0 = at(0.0)?;
            let alpha = at(1.0)?.mu[0] - f0.mu[0];
            let (beta, s) = (f0.mu[0], f0.sigma[0]);
            // E_z KL(N(alpha z + beta, s) || N(a z + b u, q)), z ~ N(m, v)
            let kl = kl_diag(
                &scalar(alpha * m + beta, s),
                &scalar(self.a * m + self.b * u[t], self.q),
            )? + (alpha - self.a).powi(2) * v / (2.0 * self.q * self.q);
            m = alpha * m + beta;
            v = alpha * alpha * v + s * s;
            elbo += recon(x[t], m, v) - kl;
        }
        Ok(elbo)
    }
}
