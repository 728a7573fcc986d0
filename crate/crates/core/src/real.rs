//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar used throughout the crate (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + FromStr
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    /// Largest argument for which `exp` stays finite, with a small margin.
    fn max_exp_arg() -> Self;
}

impl Real for f32 {
    fn max_exp_arg() -> Self {
        80.0
    }
}

impl Real for f64 {
    fn max_exp_arg() -> Self {
        700.0
    }
}
