//! Scalar abstractions.
//!
//! Continuous math (advantages, objectives, toy policies, metrics) is written
//! against [`Real`], which covers `f32` and `f64`. Reward bookkeeping is
//! written against [`RewardScalar`], which additionally admits exact
//! rationals so that reward totals can be checked without rounding.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed};

/// Floating point scalar: f32 or f64.
pub trait Real: Float + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Scalar used for reward components.
///
/// Every reward component in this crate is an integer or a half-integer
/// divided by a small configurable divisor, so anything implementing
/// signed field arithmetic works, including [`Rational`].
pub trait RewardScalar: Num + Signed + Copy + PartialOrd + Debug + Send + Sync + 'static {
    fn from_int(v: i64) -> Self;

    /// Approximate value, for reporting.
    fn to_f64(self) -> f64;
}

impl RewardScalar for f32 {
    fn from_int(v: i64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl RewardScalar for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Exact rational scalar.
pub type Rational = Ratio<i64>;

impl RewardScalar for Rational {
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(v)
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trips_halves() {
        let half = Rational::new(1, 2);
        assert_eq!(half.to_f64(), 0.5);
        assert_eq!(Rational::from_int(-1) + half + half, Rational::from_int(0));
    }

    #[test]
    fn literals() {
        assert_eq!(<f32 as Real>::lit(0.25), 0.25f32);
        assert_eq!(<f64 as Real>::of_usize(3), 3.0);
    }
}
