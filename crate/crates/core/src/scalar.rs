//! Scalar abstractions.
//!
//! Model code (dynamics, outputs, constraints) is written once against
//! [`Scalar`] and evaluated both at plain reals and at [`Jet`](crate::Jet)s,
//! which is how every derivative in the crate is obtained.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, Num};

/// Floating-point coefficient type backing a jet: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// A number that model code can be evaluated on.
///
/// Implemented for `f32`, `f64` and [`Jet<T>`](crate::Jet). Comparisons
/// (`PartialOrd`) look at the primal value only.
pub trait Scalar:
    Num
    + Copy
    + Debug
    + PartialOrd
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// Primal value, cast to `f64`.
    fn to_f64(&self) -> f64;
    /// True when every stored component is finite.
    fn is_finite(&self) -> bool;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn atan(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn abs(self) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

macro_rules! impl_scalar_for_float {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            #[inline]
            fn is_finite(&self) -> bool {
                Float::is_finite(*self)
            }
            #[inline]
            fn sin(self) -> Self {
                Float::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                Float::cos(self)
            }
            #[inline]
            fn tan(self) -> Self {
                Float::tan(self)
            }
            #[inline]
            fn exp(self) -> Self {
                Float::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                Float::ln(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                Float::sqrt(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                Float::powi(self, n)
            }
            #[inline]
            fn powf(self, p: f64) -> Self {
                Float::powf(self, p as $t)
            }
            #[inline]
            fn atan(self) -> Self {
                Float::atan(self)
            }
            #[inline]
            fn sinh(self) -> Self {
                Float::sinh(self)
            }
            #[inline]
            fn cosh(self) -> Self {
                Float::cosh(self)
            }
            #[inline]
            fn tanh(self) -> Self {
                Float::tanh(self)
            }
            #[inline]
            fn abs(self) -> Self {
                Float::abs(self)
            }
        }
    };
}

impl_scalar_for_float!(f32);
impl_scalar_for_float!(f64);

/// Euclidean dot product of two equally long slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Squared Euclidean norm.
pub fn norm_squared<S: Scalar>(a: &[S]) -> S {
    dot(a, a)
}
