use crate::diffcore::{Tape, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Gaussian with diagonal covariance, stored as means and standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian<T> {
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
}

impl<T: Real> DiagGaussian<T> {
    pub fn new(mu: Vec<T>, sigma: Vec<T>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: sigma.len(),
            });
        }
        let finite_mu = mu.iter().all(|m| m.is_finite());
        let positive_sigma = sigma.iter().all(|s| s.is_finite() && *s > T::zero());
        if !(finite_mu && positive_sigma) {
            return Err(Error::InvalidConfig(
                "Gaussian needs finite means and positive finite sigmas".into(),
            ));
        }
        Ok(Self { mu, sigma })
    }

    /// `N(0, I)`.
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![T::zero(); dim],
            sigma: vec![T::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let half = T::lit(0.5);
        let ln_2pi = (T::PI() + T::PI()).ln();
        Ok(x.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(x, (m, s))| {
                let z = (*x - *m) / *s;
                -s.ln() - half * (z * z + ln_2pi)
            })
            .sum())
    }
}

/// Normalized product of diagonal Gaussian densities: precisions add and the
/// mean is precision-weighted.
pub fn fuse_gaussians<T: Real>(components: &[DiagGaussian<T>]) -> Result<DiagGaussian<T>> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidConfig("fusion needs at least one component".into()))?;
    let d = first.dim();
    if let Some(bad) = components.iter().find(|c| c.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    if components.len() == 1 {
        return Ok(first.clone());
    }
    let mut precision = vec![T::zero(); d];
    let mut weighted = vec![T::zero(); d];
    for c in components {
        for k in 0..d {
            let p = (c.sigma[k] * c.sigma[k]).recip();
            precision[k] = precision[k] + p;
            weighted[k] = weighted[k] + p * c.mu[k];
        }
    }
    Ok(DiagGaussian {
        mu: weighted.iter().zip(&precision).map(|(w, p)| *w / *p).collect(),
        sigma: precision.iter().map(|p| p.sqrt().recip()).collect(),
    })
}

/// `KL(q || p)` summed over dimensions.
pub fn kl_diag<T: Real>(q: &DiagGaussian<T>, p: &DiagGaussian<T>) -> Result<T> {
    if q.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: p.dim(),
        });
    }
    let half = T::lit(0.5);
    Ok((0..q.dim())
        .map(|k| {
            let r = q.sigma[k] / p.sigma[k];
            let d = (q.mu[k] - p.mu[k]) / p.sigma[k];
            -r.ln() + half * (r * r + d * d - T::one())
        })
        .sum())
}

/// A diagonal Gaussian whose parameters live on a tape.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussVar {
    pub mu: Var,
    pub sigma: Var,
}

impl GaussVar {
    pub fn values<T: Real>(&self, tape: &Tape<T>) -> DiagGaussian<T> {
        DiagGaussian {
            mu: tape.value(self.mu).to_vec(),
            sigma: tape.value(self.sigma).to_vec(),
        }
    }

    pub fn constant<T: Real>(tape: &mut Tape<T>, g: &DiagGaussian<T>) -> Self {
        Self {
            mu: tape.constant(g.mu.clone()),
            sigma: tape.constant(g.sigma.clone()),
        }
    }
}

pub(crate) fn fuse_on_tape<T: Real>(tape: &mut Tape<T>, parts: &[GaussVar]) -> Result<GaussVar> {
    if parts.len() == 1 {
        return Ok(parts[0]);
    }
    let mut precision: Option<Var> = None;
    let mut weighted: Option<Var> = None;
    for g in parts {
        let var = tape.square(g.sigma);
        let p = tape.recip(var);
        let pm = tape.mul(p, g.mu)?;
        precision = Some(match precision {
            Some(acc) => tape.add(acc, p)?,
            None => p,
        });
        weighted = Some(match weighted {
            Some(acc) => tape.add(acc, pm)?,
            None => pm,
        });
    }
    let (precision, weighted) = match (precision, weighted) {
        (Some(p), Some(w)) => (p, w),
        _ => return Err(Error::InvalidConfig("fusion needs at least one component".into())),
    };
    let mu = tape.div(weighted, precision)?;
    let root = tape.sqrt(precision);
    let sigma = tape.recip(root);
    Ok(GaussVar { mu, sigma })
}

pub(crate) fn kl_on_tape<T: Real>(tape: &mut Tape<T>, q: GaussVar, p: GaussVar) -> Result<Var> {
    let r = tape.div(q.sigma, p.sigma)?;
    let diff = tape.sub(q.mu, p.mu)?;
    let d = tape.div(diff, p.sigma)?;
    let r2 = tape.square(r);
    let d2 = tape.square(d);
    let quad = tape.add(r2, d2)?;
    let quad = tape.offset(quad, -T::one());
    let quad = tape.scale(quad, T::lit(0.5));
    let log_r = tape.log(r);
    let terms = tape.sub(quad, log_r)?;
    Ok(tape.sum(terms))
}

pub(crate) fn log_density_on_tape<T: Real>(tape: &mut Tape<T>, g: GaussVar, x: Var) -> Result<Var> {
    let diff = tape.sub(x, g.mu)?;
    let z = tape.div(diff, g.sigma)?;
    let z2 = tape.square(z);
    let half = tape.scale(z2, T::lit(-0.5));
    let log_s = tape.log(g.sigma);
    let terms = tape.sub(half, log_s)?;
    let total = tape.sum(terms);
    let n = T::lit(tape.value(x).len() as f64);
    let ln_2pi = (T::PI() + T::PI()).ln();
    Ok(tape.offset(total, -T::lit(0.5) * n * ln_2pi))
}
