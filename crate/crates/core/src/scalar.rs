//! Scalar abstraction: every numeric module in this crate is generic over a
//! floating-point type so the same code runs at `f32` or `f64` precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for constants and RNG draws.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to any Real")
    }

    /// Lossy conversion to `f64`, used for serialization and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("any Real converts to f64")
    }

    fn pi() -> Self {
        Self::from_f64_lossy(std::f64::consts::PI)
    }

    fn two_pi() -> Self {
        Self::from_f64_lossy(std::f64::consts::TAU)
    }

    fn half() -> Self {
        Self::from_f64_lossy(0.5)
    }

    fn two() -> Self {
        Self::from_f64_lossy(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
