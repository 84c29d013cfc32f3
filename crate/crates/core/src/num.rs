//! Scalar abstractions.
//!
//! Scoring code (language-model likelihoods, Rocchio weights, representation
//! weights) needs logarithms and is written against [`Scalar`], which both
//! `f32` and `f64` implement. Counting metrics only need field arithmetic and
//! are written against [`Real`], so they can also be evaluated exactly over
//! rationals such as `num_rational::Ratio<i64>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Field-like numbers: enough to form ratios of counts.
pub trait Real: Num + Copy + PartialOrd + FromPrimitive + Debug {
    /// Converts a count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Real for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Floating point scalars used by ranking and feedback code.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
