//! Scalar abstractions.
//!
//! Floating-point code is written against [`Real`], implemented for `f32` and
//! `f64`. Exact exponent arithmetic is written against [`ExactScalar`],
//! implemented for `BigRational` and the fixed-width `Ratio<i64>` /
//! `Ratio<i128>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Floating-point scalar used by kernels and quadrature.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Send + Sync + Debug + Display + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal converts to Real")
    }

    /// Converts to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest |x| the kernels will evaluate at.
    #[inline]
    fn singular_floor() -> Self {
        let f = Self::lit(1e-300);
        if f > Self::zero() {
            f
        } else {
            Self::min_positive_value()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact ordered field used for exponent bookkeeping.
pub trait ExactScalar: Clone + Ord + Num + Signed + Debug + Display + Send + Sync + 'static {
    fn from_int(v: i64) -> Self;
    fn from_frac(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }
    fn to_f64(&self) -> f64;
    /// Exact conversion to a big rational.
    fn to_big(&self) -> BigRational;
}

impl ExactScalar for BigRational {
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn to_big(&self) -> BigRational {
        self.clone()
    }
}

macro_rules! impl_exact_fixed {
    ($t:ty) => {
        impl ExactScalar for Ratio<$t> {
            fn from_int(v: i64) -> Self {
                Ratio::from_integer(v as $t)
            }
            fn to_f64(&self) -> f64 {
                *self.numer() as f64 / *self.denom() as f64
            }
            fn to_big(&self) -> BigRational {
                BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
            }
        }
    };
}

impl_exact_fixed!(i64);
impl_exact_fixed!(i128);

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp = self.comp + ((self.sum - t) + v);
        } else {
            self.comp = self.comp + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Sums a slice in its given order with compensation.
pub fn compensated_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut s = CompensatedSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

/// Surface area of the unit sphere in R^d (d >= 1); 2 for d = 1.
pub fn sphere_area(d: usize) -> f64 {
    d as f64 * ball_volume(d)
}

/// Volume of the unit ball in R^d.
pub fn ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2 pi / d * V_{d-2}
    let mut v = [1.0, 2.0];
    if d < 2 {
        return v[d];
    }
    for k in 2..=d {
        let next = 2.0 * std::f64::consts::PI / k as f64 * v[k % 2];
        v[k % 2] = next;
    }
    v[d % 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn compensation_beats_naive() {
        let vals = [1.0e16, 1.0, -1.0e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }

    #[test]
    fn exact_conversions_agree() {
        let a = Ratio::<i128>::from_frac(9, 10);
        let b = BigRational::from_frac(9, 10);
        assert_eq!(a.to_big(), b);
        assert!((ExactScalar::to_f64(&b) - 0.9).abs() < 1e-16);
    }
}
