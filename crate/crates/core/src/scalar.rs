//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for losses, probabilities and convex-function values.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// (1e-9 for inequalities, 1e-12 for identities) assume `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

/// Tolerance for checking that a vector of `len` probabilities sums to one.
pub(crate) fn simplex_tolerance<S: Scalar>(len: usize) -> S {
    let eps_scaled = S::epsilon() * S::from_count(4 * len.max(1));
    S::lit(1e-9).max(eps_scaled)
}
