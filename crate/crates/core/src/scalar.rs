//! Floating-point scalar abstraction.
//!
//! Everything numeric in this crate is generic over [`Real`], so the whole
//! pipeline can run in `f32` or `f64`. The concrete aliases at the crate root
//! fix `f64`, which is what the CLI and the acceptance tolerances assume.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Display + LowerExp + Debug + FftNum
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for `T::from_f64(x).unwrap()`; every `f64` literal used by the
/// algorithms is representable in `f32`.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal must be representable")
}

/// `usize` to scalar conversion for grid sizes and counters.
#[inline]
pub fn real_of_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count must be representable")
}

/// Kahan-compensated sum. The descent line search certifies decreases close
/// to the ulp of the energy, so the `O(M)` reductions behind it must not
/// carry `O(sqrt(M) eps)` summation noise.
#[inline]
pub fn kahan_sum<T: Real>(values: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}
