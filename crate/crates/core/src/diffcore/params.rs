use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;

use super::tape::{Gradients, Tape};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named, fixed-shape parameter tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    name: String,
    rows: usize,
    cols: usize,
    value: Vec<T>,
    grad: Vec<T>,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Param<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn value(&self) -> &[T] {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut [T] {
        &mut self.value
    }

    pub fn grad(&self) -> &[T] {
        &self.grad
    }
}

/// Ordered collection of trainable parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    step: u64,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            step: 0,
        }
    }

    /// Registers a parameter. Names must be unique; `values.len()` must equal
    /// `rows * cols`.
    pub fn add(&mut self, name: &str, rows: usize, cols: usize, values: Vec<T>) -> Result<ParamId> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "param",
                detail: format!("{name}: {rows}x{cols} needs {} values, got {}", rows * cols, values.len()),
            });
        }
        if self.find(name).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate parameter name {name}")));
        }
        let n = values.len();
        self.params.push(Param {
            name: name.to_string(),
            rows,
            cols,
            value: values,
            grad: vec![T::zero(); n],
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, rows, cols, vec![T::zero(); rows * cols])
    }

    /// Xavier-uniform initialization, `U(-a, a)` with `a = sqrt(6 / (rows + cols))`.
    pub fn xavier<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let values = (0..rows * cols)
            .map(|_| T::lit(rng.gen_range(-a..a)))
            .collect();
        self.add(name, rows, cols, values)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Adds the parameter adjoints recorded in `grads` (from `tape`) into the
    /// stored gradient accumulators.
    pub fn accumulate(&mut self, tape: &Tape<T>, grads: &Gradients<T>) {
        for (id, g) in tape.param_grads(grads) {
            for (dst, src) in self.params[id.0].grad.iter_mut().zip(g) {
                *dst = *dst + *src;
            }
        }
    }

    pub fn scale_grads(&mut self, s: T) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = *g * s);
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// True when both stores hold identically named, shaped and valued
    /// parameters (optimizer state ignored).
    pub fn same_values(&self, other: &Self) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.shape() == b.shape() && a.value == b.value)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> Default for Adam<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

impl<T: Real> Adam<T> {
    pub fn with_lr(lr: T) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    /// One update from the accumulated gradients, which are zeroed afterwards.
    pub fn step(&self, store: &mut ParamStore<T>) {
        store.step += 1;
        let t = store.step as i32;
        let one = T::one();
        let c1 = one - self.beta1.powi(t);
        let c2 = one - self.beta2.powi(t);
        for p in &mut store.params {
            for k in 0..p.value.len() {
                let g = p.grad[k];
                p.m[k] = self.beta1 * p.m[k] + (one - self.beta1) * g;
                p.v[k] = self.beta2 * p.v[k] + (one - self.beta2) * g * g;
                let m_hat = p.m[k] / c1;
                let v_hat = p.v[k] / c2;
                p.value[k] = p.value[k] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
                p.grad[k] = T::zero();
            }
        }
    }
}
