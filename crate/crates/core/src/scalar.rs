//! Floating point scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type every numeric routine in this crate is generic over.
///
/// Implemented for `f32` and `f64`. `f64` is the type the command line tool
/// and the crate-root aliases use; `f32` exists for callers that trade
/// precision for memory.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + Product<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant. Out-of-range values saturate to infinity,
    /// which never happens for the constants used in this crate.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant must convert to Scalar")
    }

    /// Lossy view as `f64` for diagnostics and error payloads.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
