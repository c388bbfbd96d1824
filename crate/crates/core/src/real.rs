//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the analysis is generic over: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance on a row sum before a vector stops counting as a distribution.
    fn stochastic_tolerance() -> Self;

    /// Tolerance used when two computed information values are compared.
    fn comparison_tolerance() -> Self;
}

impl Real for f64 {
    fn stochastic_tolerance() -> Self {
        1e-9
    }

    fn comparison_tolerance() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn stochastic_tolerance() -> Self {
        1e-5
    }

    fn comparison_tolerance() -> Self {
        1e-5
    }
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Pairwise (cascade) summation; result depends only on the order of `xs`.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `p * log2(p / q)` with the `0 log 0 = 0` convention. Caller guarantees `q > 0` when `p > 0`.
#[inline]
pub(crate) fn xlog2_ratio<T: Real>(p: T, q: T) -> T {
    if p <= T::zero() {
        T::zero()
    } else {
        p * (p / q).log2()
    }
}
