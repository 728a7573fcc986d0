//! Dense layers and small multilayer perceptrons built on the tape.

use rand::Rng;

use crate::error::Result;
use crate::real::Real;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};

/// Affine map `w x + b` with a Xavier-initialized weight and zero bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.xavier(&format!("{name}.w"), outputs, inputs, rng)?;
        let b = store.zeros(&format!("{name}.b"), outputs, 1)?;
        Ok(Self {
            w,
            b,
            inputs,
            outputs,
        })
    }

    /// Looks up an existing layer by name (used after loading a store).
    pub fn bind<T: Real>(store: &ParamStore<T>, name: &str) -> Result<Self> {
        let find = |suffix: &str| {
            store.find(&format!("{name}.{suffix}")).ok_or_else(|| {
                crate::Error::Format(format!("missing parameter {name}.{suffix}"))
            })
        };
        let w = find("w")?;
        let b = find("b")?;
        let (outputs, inputs) = store.get(w).shape();
        Ok(Self {
            w,
            b,
            inputs,
            outputs,
        })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let wx = tape.matvec(w, x)?;
        tape.add(wx, b)
    }
}

/// Stack of dense layers with `tanh` between them and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes` lists layer widths from input to output.
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        sizes: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, name: &str, depth: usize) -> Result<Self> {
        let layers = (0..depth)
            .map(|i| Dense::bind(store, &format!("{name}.{i}")))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i + 1 < self.layers.len() {
                h = tape.tanh(h);
            }
        }
        Ok(h)
    }
}
