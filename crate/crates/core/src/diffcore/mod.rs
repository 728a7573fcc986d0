//! Reverse-mode differentiation over vector-valued nodes, parameter storage,
//! the Adam optimizer, persistence, and a finite-difference gradient checker.

mod gradcheck;
pub mod nn;
mod params;
pub mod persist;
mod tape;

pub use gradcheck::{gradient_check, relative_error, GradCheckOptions, GradCheckReport};
pub use params::{Adam, Param, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};

#[allow(unused_imports)]
pub(crate) use tape::{sigmoid, softplus};
