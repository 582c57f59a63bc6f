//! Scalar abstraction for all state arithmetic.
//!
//! Every numeric routine in this crate is generic over [`Scalar`] so the same
//! code runs in f32 or f64. The crate root exports f64 aliases, which is what
//! the harness and CLI use.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar usable for protocol state, graph weights and spectra.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; lossy for narrower types.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal")
    }

    /// Converts a count into the scalar domain.
    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("count representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
