//! Nestable forward-mode dual numbers.
//!
//! A [`Jet`] of depth `k` is a polynomial in `k` independent infinitesimals
//! `ε₁ … ε_k` with `εᵢ² = 0`. Its coefficients are indexed by bit masks:
//! bit `i` of the index set means the coefficient multiplies `ε_{i+1}`.
//! Depth `k` is exactly the `k`-fold nested dual `Dual<Dual<…<T>>>`, but the
//! nesting is decided at run time, which is what arbitrary-order Lie
//! derivative chains need.
//!
//! New infinitesimals are introduced with [`Jet::seed`], which always picks
//! a direction above every direction present in its inputs, so nested
//! differentiation never confuses perturbations as long as functions only
//! combine values derived from their arguments.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign,
};

use num_traits::{Num, One, Zero};

use crate::scalar::{Real, Scalar};

/// Maximum number of simultaneously active infinitesimals.
pub const MAX_DEPTH: usize = 4;
const CAPACITY: usize = 1 << MAX_DEPTH;

/// Nested dual number with up to [`MAX_DEPTH`] infinitesimal directions.
///
/// Equality and ordering compare primal values only.
#[derive(Clone, Copy)]
pub struct Jet<T: Real> {
    depth: u8,
    coeffs: [T; CAPACITY],
}

/// The infinitesimal introduced by one call to [`Jet::seed`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Direction(u8);

impl Direction {
    /// One-based index of the infinitesimal.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl<T: Real> Jet<T> {
    /// A plain real with no active directions.
    #[inline]
    pub fn constant(value: T) -> Self {
        let mut coeffs = [T::zero(); CAPACITY];
        coeffs[0] = value;
        Jet { depth: 0, coeffs }
    }

    /// Builds a jet from raw coefficients (`coeffs.len()` must be `2^depth`).
    pub fn from_coefficients(depth: usize, coeffs: &[T]) -> Self {
        assert!(depth <= MAX_DEPTH, "jet depth {depth} exceeds {MAX_DEPTH}");
        assert_eq!(coeffs.len(), 1 << depth);
        let mut out = [T::zero(); CAPACITY];
        out[..coeffs.len()].copy_from_slice(coeffs);
        Jet {
            depth: depth as u8,
            coeffs: out,
        }
    }

    #[inline]
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth as usize
    }

    /// Coefficient multiplying the product of the infinitesimals in `mask`.
    #[inline]
    pub fn coefficient(&self, mask: usize) -> T {
        self.coeffs[mask]
    }

    #[inline]
    fn len(&self) -> usize {
        1 << self.depth
    }

    #[inline]
    fn zero_at(depth: u8) -> Self {
        Jet {
            depth,
            coeffs: [T::zero(); CAPACITY],
        }
    }

    /// Lifts `points` to `points + ε·tangents` along a fresh infinitesimal.
    ///
    /// The new direction sits one level above the deepest input, so the
    /// result can be differentiated again by a later `seed`.
    ///
    /// # Panics
    /// When the nesting would exceed [`MAX_DEPTH`] or the slices differ in
    /// length.
    pub fn seed(points: &[Self], tangents: &[Self]) -> (Vec<Self>, Direction) {
        assert_eq!(points.len(), tangents.len(), "seed: length mismatch");
        let below = points
            .iter()
            .chain(tangents)
            .map(|j| j.depth)
            .max()
            .unwrap_or(0);
        let depth = below + 1;
        assert!(
            depth as usize <= MAX_DEPTH,
            "jet nesting depth {depth} exceeds {MAX_DEPTH}"
        );
        let half = 1usize << below;
        let lifted = points
            .iter()
            .zip(tangents)
            .map(|(p, t)| {
                let mut out = Self::zero_at(depth);
                out.coeffs[..half].copy_from_slice(&p.coeffs[..half]);
                out.coeffs[half..2 * half].copy_from_slice(&t.coeffs[..half]);
                out
            })
            .collect();
        (lifted, Direction(depth))
    }

    /// Seeds plain reals along a plain direction vector.
    pub fn seed_real(points: &[T], tangents: &[T]) -> (Vec<Self>, Direction) {
        let p: Vec<Self> = points.iter().map(|&v| Self::constant(v)).collect();
        let t: Vec<Self> = tangents.iter().map(|&v| Self::constant(v)).collect();
        Self::seed(&p, &t)
    }

    /// Splits `self = primal + ε_d · tangent` and returns both parts.
    ///
    /// Splitting off the outermost direction drops one level of nesting;
    /// any other direction is zeroed in place so that directions seeded
    /// later keep their identity.
    pub fn split(&self, d: Direction) -> (Self, Self) {
        let bit = d.0 as usize - 1;
        if self.depth() <= bit {
            return (*self, Self::zero_at(self.depth));
        }
        if bit + 1 == self.depth() {
            let depth = self.depth - 1;
            let half = 1usize << depth;
            let mut primal = Self::zero_at(depth);
            let mut tangent = Self::zero_at(depth);
            primal.coeffs[..half].copy_from_slice(&self.coeffs[..half]);
            tangent.coeffs[..half].copy_from_slice(&self.coeffs[half..2 * half]);
            return (primal, tangent);
        }
        let mut primal = Self::zero_at(self.depth);
        let mut tangent = Self::zero_at(self.depth);
        let flag = 1usize << bit;
        for idx in (0..self.len()).filter(|i| i & flag == 0) {
            primal.coeffs[idx] = self.coeffs[idx];
            tangent.coeffs[idx] = self.coeffs[idx | flag];
        }
        (primal, tangent)
    }

    /// Coefficient of `ε_d`, i.e. the derivative along direction `d`.
    #[inline]
    pub fn tangent(&self, d: Direction) -> Self {
        self.split(d).1
    }

    /// The part of `self` not involving `ε_d`.
    #[inline]
    pub fn primal(&self, d: Direction) -> Self {
        self.split(d).0
    }

    /// Evaluates a truncated Taylor series `Σ c_j δ^j` at the infinitesimal
    /// part `δ` of `self`; `series[j]` is `f⁽ʲ⁾(value)/j!`.
    fn compose(&self, series: &[T]) -> Self {
        let depth = self.depth();
        debug_assert!(series.len() > depth);
        let mut delta = *self;
        delta.coeffs[0] = T::zero();
        let mut out = Self::constant(series[depth]);
        for j in (0..depth).rev() {
            out *= delta;
            out.coeffs[0] += series[j];
        }
        out
    }

    fn from_index(j: usize) -> T {
        T::from_usize(j).expect("index fits in a float")
    }

    fn factorial(j: usize) -> T {
        (1..=j).fold(T::one(), |acc, i| acc * Self::from_index(i))
    }

    fn power_series(&self, exponent: T, at: impl Fn(T) -> T) -> Vec<T> {
        let mut falling = T::one();
        (0..=self.depth())
            .map(|j| {
                if j > 0 {
                    falling *= exponent - Self::from_index(j - 1);
                }
                if j == 0 {
                    at(exponent)
                } else {
                    falling / Self::factorial(j) * at(exponent - Self::from_index(j))
                }
            })
            .collect()
    }
}

impl<T: Real> Default for Jet<T> {
    fn default() -> Self {
        Self::constant(T::zero())
    }
}

impl<T: Real> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.depth == 0 {
            write!(f, "Jet({:?})", self.value())
        } else {
            f.debug_struct("Jet")
                .field("depth", &self.depth)
                .field("coeffs", &&self.coeffs[..self.len()])
                .finish()
        }
    }
}

impl<T: Real> fmt::Display for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.value(), f)
    }
}

impl<T: Real> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.value() == other.value()
    }
}

impl<T: Real> PartialOrd for Jet<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let depth = self.depth.max(rhs.depth);
        let mut out = Self::zero_at(depth);
        for i in 0..(1usize << depth) {
            out.coeffs[i] = self.coeffs[i] + rhs.coeffs[i];
        }
        out
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let depth = self.depth.max(rhs.depth);
        let mut out = Self::zero_at(depth);
        for i in 0..(1usize << depth) {
            out.coeffs[i] = self.coeffs[i] - rhs.coeffs[i];
        }
        out
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut out = self;
        for c in out.coeffs[..self.len()].iter_mut() {
            *c = -*c;
        }
        out
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let depth = self.depth.max(rhs.depth);
        let mut out = Self::zero_at(depth);
        let (a, b) = (&self.coeffs, &rhs.coeffs);
        for s in 0..(1usize << depth) {
            // Sum over all submasks t of s (subset convolution).
            let mut t = s;
            let mut acc = a[t] * b[s ^ t];
            while t != 0 {
                t = (t - 1) & s;
                acc += a[t] * b[s ^ t];
            }
            out.coeffs[s] = acc;
        }
        out
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let depth = self.depth.max(rhs.depth);
        let mut q = Self::zero_at(depth);
        let (a, b) = (&self.coeffs, &rhs.coeffs);
        let b0 = b[0];
        q.coeffs[0] = a[0] / b0;
        for s in 1..(1usize << depth) {
            // a[s] = Σ_{t ⊆ s} q[t] b[s∖t]; solve for q[s].
            let mut acc = a[s];
            let mut t = s;
            while t != 0 {
                t = (t - 1) & s;
                acc -= q.coeffs[t] * b[s ^ t];
            }
            q.coeffs[s] = acc / b0;
        }
        q
    }
}

impl<T: Real> Rem for Jet<T> {
    type Output = Self;
    /// Truncated remainder `self - trunc(self/rhs)·rhs`, with the quotient
    /// treated as locally constant.
    fn rem(self, rhs: Self) -> Self {
        let k = (self.value() / rhs.value()).trunc();
        self - Self::constant(k) * rhs
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<T: Real> $tr for Jet<T> {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}

assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl<T: Real> Zero for Jet<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.coeffs[..self.len()].iter().all(|c| c.is_zero())
    }
}

impl<T: Real> One for Jet<T> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Real> Num for Jet<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Self::constant)
    }
}

impl<T: Real> Scalar for Jet<T> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v).expect("representable constant"))
    }

    #[inline]
    fn to_f64(&self) -> f64 {
        self.value().to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite(&self) -> bool {
        self.coeffs[..self.len()].iter().all(|c| c.is_finite())
    }

    fn sin(self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<T> = (0..=self.depth())
            .map(|j| cycle[j % 4] / Self::factorial(j))
            .collect();
        self.compose(&series)
    }

    fn cos(self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<T> = (0..=self.depth())
            .map(|j| cycle[j % 4] / Self::factorial(j))
            .collect();
        self.compose(&series)
    }

    fn tan(self) -> Self {
        Scalar::sin(self) / Scalar::cos(self)
    }

    fn exp(self) -> Self {
        let e = self.value().exp();
        let series: Vec<T> = (0..=self.depth()).map(|j| e / Self::factorial(j)).collect();
        self.compose(&series)
    }

    fn ln(self) -> Self {
        let a = self.value();
        let series: Vec<T> = (0..=self.depth())
            .map(|j| {
                if j == 0 {
                    a.ln()
                } else {
                    let sign = if j % 2 == 1 { T::one() } else { -T::one() };
                    sign / (Self::from_index(j) * a.powi(j as i32))
                }
            })
            .collect();
        self.compose(&series)
    }

    fn sqrt(self) -> Self {
        let depth = self.depth;
        let mut q = Self::zero_at(depth);
        let q0 = self.coeffs[0].sqrt();
        q.coeffs[0] = q0;
        let two_q0 = q0 + q0;
        for s in 1..(1usize << depth) {
            let mut acc = self.coeffs[s];
            let mut t = (s - 1) & s;
            while t != 0 {
                acc -= q.coeffs[t] * q.coeffs[s ^ t];
                t = (t - 1) & s;
            }
            q.coeffs[s] = acc / two_q0;
        }
        q
    }

    fn powi(self, n: i32) -> Self {
        if self.depth == 0 {
            return Self::constant(self.value().powi(n));
        }
        let a = self.value();
        let exponent = T::from_i32(n).expect("exponent fits");
        let series = self.power_series(exponent, |e| {
            a.powi(e.to_i32().expect("integral exponent"))
        });
        self.compose(&series)
    }

    fn powf(self, p: f64) -> Self {
        let a = self.value();
        let exponent = T::from_f64(p).expect("exponent fits");
        let series = self.power_series(exponent, |e| a.powf(e));
        self.compose(&series)
    }

    fn atan(self) -> Self {
        let a = self.value();
        let depth = self.depth();
        // Series of 1/(1 + (a+s)²) via power-series division, then integrate.
        let q0 = T::one() + a * a;
        let q1 = a + a;
        let mut r: Vec<T> = Vec::with_capacity(depth);
        for k in 0..depth {
            let v = match k {
                0 => T::one() / q0,
                1 => -(q1 * r[0]) / q0,
                _ => -(q1 * r[k - 1] + r[k - 2]) / q0,
            };
            r.push(v);
        }
        let mut series = Vec::with_capacity(depth + 1);
        series.push(a.atan());
        for (k, rk) in r.iter().enumerate() {
            series.push(*rk / Self::from_index(k + 1));
        }
        self.compose(&series)
    }

    fn sinh(self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let series: Vec<T> = (0..=self.depth())
            .map(|j| if j % 2 == 0 { s } else { c } / Self::factorial(j))
            .collect();
        self.compose(&series)
    }

    fn cosh(self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let series: Vec<T> = (0..=self.depth())
            .map(|j| if j % 2 == 0 { c } else { s } / Self::factorial(j))
            .collect();
        self.compose(&series)
    }

    fn tanh(self) -> Self {
        // y' = 1 - y², solved order by order.
        let depth = self.depth();
        let mut c = Vec::with_capacity(depth + 1);
        c.push(self.value().tanh());
        for k in 0..depth {
            let mut acc = if k == 0 { T::one() } else { T::zero() };
            for i in 0..=k {
                acc -= c[i] * c[k - i];
            }
            c.push(acc / Self::from_index(k + 1));
        }
        self.compose(&c)
    }

    fn abs(self) -> Self {
        if self.value() < T::zero() {
            -self
        } else {
            self
        }
    }
}
