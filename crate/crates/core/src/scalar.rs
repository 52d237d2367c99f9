//! Storage scalar abstraction.
//!
//! Parameters and embeddings are stored in a generic [`Scalar`] (`f32` or
//! `f64`). Every forward, backward and scoring pass widens to `f64` before
//! accumulating, so results only depend on the storage type through the
//! rounding of stored values.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Tag written into checkpoints.
    const NAME: &'static str;

    /// Rounds an `f64` to the storage type.
    fn of(v: f64) -> Self;

    /// Widens to `f64` for accumulation.
    fn wide(self) -> f64;
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn wide(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn wide(self) -> f64 {
        self as f64
    }
}
