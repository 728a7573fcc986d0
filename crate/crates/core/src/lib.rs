//! Magnetic ball-and-socket joint pose estimation.
//!
//! The crate bundles a synthetic magnetic sensor rig ([`simkit`]), a small
//! reverse-mode differentiation engine ([`diffcore`]), and two sequence
//! regressors that map sensor streams to joint rotations: a windowed LSTM
//! ([`lstm`]) and a fusion variational Bayes filter ([`dvbf`]). [`evalkit`]
//! scores both and runs the sensor-spike comparison.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the scalar
//! to `f64`, which is what the pipeline trains and evaluates with.

pub mod diffcore;
pub mod dvbf;
pub mod error;
pub mod evalkit;
pub mod kv;
pub mod lstm;
pub mod real;
pub mod rotation;
pub mod simkit;

pub use error::{Error, Result};
pub use real::Real;

pub type Rotation = rotation::Rotation<f64>;
pub type EulerAngles = rotation::EulerAngles<f64>;
pub type SixD = rotation::SixD<f64>;

pub type Tape = diffcore::Tape<f64>;
pub type ParamStore = diffcore::ParamStore<f64>;

pub type DiagGaussian = dvbf::DiagGaussian<f64>;
pub type LstmRegressor = lstm::LstmRegressor<f64>;
pub type DvbfModel = dvbf::DvbfModel<f64>;
