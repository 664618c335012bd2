use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Scalar type for all measure and operator arithmetic.
///
/// Implemented for `f32` and `f64`; everything in the crate that does actual
/// numeric work is generic over this trait so solvers can be instantiated at
/// either precision.
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Shorthand for `T::from_f64(v).unwrap()`, for constants known to fit.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }

    /// Lossy view as `f64`, for reporting and for RNG plumbing.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Normalization tolerance at this precision.
    ///
    /// The `f64` contract is [`crate::NORMALIZATION_TOL`]; narrower types get
    /// the scaled equivalent so "sums to one" checks stay meaningful.
    fn mass_tol() -> Self {
        Self::of(crate::NORMALIZATION_TOL).max(Self::epsilon() * Self::of(16.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
