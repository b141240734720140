//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
///
/// The associated tolerances are the numerical slack each routine is allowed
/// for its precision. The `f64` values are the ones the test suites pin.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Allowed deviation of a probability vector's total mass from one.
    const NORMALIZATION_TOL: f64;
    /// Slack for inequality checks (constraints, sandwich orderings).
    const INEQUALITY_TOL: f64;
    /// Entries of an extreme point above `-FEASIBILITY_TOL` count as nonnegative.
    const FEASIBILITY_TOL: f64;
    /// Strict positivity threshold for the base points of valid index sets.
    const POSITIVITY_TOL: f64;
    /// Largest condition number accepted for a square submatrix.
    const CONDITION_LIMIT: f64;
    /// Smallest pivot magnitude the simplex solver accepts.
    const PIVOT_TOL: f64;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f64 {
    const NORMALIZATION_TOL: f64 = 1e-12;
    const INEQUALITY_TOL: f64 = 1e-9;
    const FEASIBILITY_TOL: f64 = 1e-12;
    const POSITIVITY_TOL: f64 = 1e-12;
    const CONDITION_LIMIT: f64 = 1e12;
    const PIVOT_TOL: f64 = 1e-11;
}

impl Real for f32 {
    const NORMALIZATION_TOL: f64 = 1e-5;
    const INEQUALITY_TOL: f64 = 1e-4;
    const FEASIBILITY_TOL: f64 = 1e-6;
    const POSITIVITY_TOL: f64 = 1e-6;
    const CONDITION_LIMIT: f64 = 1e6;
    const PIVOT_TOL: f64 = 1e-5;
}
