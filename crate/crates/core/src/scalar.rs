//! Scalar abstraction for the numerical kernels.
//!
//! The LP solver and the least-squares fit only need field arithmetic, an
//! ordering and a zero test, so they run unchanged on `f32`, `f64` and exact
//! rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Ordered field element usable by the simplex and regression code.
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync
{
    /// Magnitudes at or below this value are treated as zero.
    fn epsilon() -> Self;

    /// Converts from `f64`, exactly where the representation allows it.
    fn from_f64_lossy(value: f64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= Self::epsilon()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn epsilon() -> Self {
        1e-9
    }

    fn from_f64_lossy(value: f64) -> Self {
        value
    }
}

impl Scalar for f32 {
    fn epsilon() -> Self {
        1e-5
    }

    fn from_f64_lossy(value: f64) -> Self {
        value as f32
    }
}

impl Scalar for BigRational {
    fn epsilon() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }

    /// Binary floats are dyadic rationals, so this conversion is exact.
    fn from_f64_lossy(value: f64) -> Self {
        BigRational::from_float(value).expect("finite value")
    }
}
