//! Scalar abstractions shared by every differentiation layer.
//!
//! [`Scalar`] is the minimal arithmetic needed to write an integrand once and
//! evaluate it on plain floats, forward duals, or reverse-mode tape variables.
//! [`Real`] adds what the batched network kernels need: constants without a
//! reference value, compound assignment and thread safety.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Innermost floating-point value.
    fn primal(&self) -> f64;
    /// A constant living in the same context as `self` (same tape, same lanes).
    fn constant_like(&self, c: f64) -> Self;
    fn tanh(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

pub trait Real: Scalar + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static {
    fn from_f64(c: f64) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn primal(&self) -> f64 {
        *self
    }
    #[inline]
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(c: f64) -> Self {
        c
    }
    #[inline]
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// First-order forward-mode number carrying `K` independent tangent lanes.
///
/// Seeding parameter tangents with `K` columns of the identity and running a
/// reverse sweep on `Dual<K>` values yields `K` Hessian columns at once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const K: usize> {
    pub re: f64,
    pub du: [f64; K],
}

impl<const K: usize> Default for Dual<K> {
    fn default() -> Self {
        Self { re: 0.0, du: [0.0; K] }
    }
}

impl<const K: usize> Dual<K> {
    pub fn constant(re: f64) -> Self {
        Self { re, du: [0.0; K] }
    }

    pub fn new(re: f64, du: [f64; K]) -> Self {
        Self { re, du }
    }

    /// `f(self)` given `f(re)` and `f'(re)`.
    #[inline]
    fn chain(self, value: f64, slope: f64) -> Self {
        let mut du = self.du;
        for d in &mut du {
            *d *= slope;
        }
        Self { re: value, du }
    }
}

impl<const K: usize> Add for Dual<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re += rhs.re;
        for (a, b) in self.du.iter_mut().zip(rhs.du.iter()) {
            *a += b;
        }
        self
    }
}

impl<const K: usize> Sub for Dual<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re -= rhs.re;
        for (a, b) in self.du.iter_mut().zip(rhs.du.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const K: usize> Mul for Dual<K> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut du = [0.0; K];
        for ((d, a), b) in du.iter_mut().zip(self.du.iter()).zip(rhs.du.iter()) {
            *d = self.re * b + rhs.re * a;
        }
        Self { re: self.re * rhs.re, du }
    }
}

impl<const K: usize> Div for Dual<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let re = self.re * inv;
        let mut du = [0.0; K];
        for ((d, a), b) in du.iter_mut().zip(self.du.iter()).zip(rhs.du.iter()) {
            *d = (a - re * b) * inv;
        }
        Self { re, du }
    }
}

impl<const K: usize> Neg for Dual<K> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.re = -self.re;
        for d in &mut self.du {
            *d = -*d;
        }
        self
    }
}

impl<const K: usize> Add<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.re += rhs;
        self
    }
}

impl<const K: usize> Sub<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.re -= rhs;
        self
    }
}

impl<const K: usize> Mul<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        self.re *= rhs;
        for d in &mut self.du {
            *d *= rhs;
        }
        self
    }
}

impl<const K: usize> Div<f64> for Dual<K> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const K: usize> AddAssign for Dual<K> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.re += rhs.re;
        for (a, b) in self.du.iter_mut().zip(rhs.du.iter()) {
            *a += b;
        }
    }
}

impl<const K: usize> SubAssign for Dual<K> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.re -= rhs.re;
        for (a, b) in self.du.iter_mut().zip(rhs.du.iter()) {
            *a -= b;
        }
    }
}

impl<const K: usize> MulAssign for Dual<K> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const K: usize> Scalar for Dual<K> {
    #[inline]
    fn primal(&self) -> f64 {
        self.re
    }
    #[inline]
    fn constant_like(&self, c: f64) -> Self {
        Self::constant(c)
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, 1.0 - t * t)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
}

impl<const K: usize> Real for Dual<K> {
    #[inline]
    fn from_f64(c: f64) -> Self {
        Self::constant(c)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.du.iter().all(|d| d.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn dual_lanes_track_independent_tangents() {
        let x = Dual::<2>::new(0.7, [1.0, 0.0]);
        let y = Dual::<2>::new(-1.3, [0.0, 1.0]);
        let z = (x * y).tanh() + x.exp() / y - (x * x).sin();
        let f = |a: f64, b: f64| (a * b).tanh() + a.exp() / b - (a * a).sin();
        let dx = fd(|a| f(a, -1.3), 0.7);
        let dy = fd(|b| f(0.7, b), -1.3);
        assert!((z.re - f(0.7, -1.3)).abs() < 1e-14);
        assert!((z.du[0] - dx).abs() < 1e-8);
        assert!((z.du[1] - dy).abs() < 1e-8);
    }

    #[test]
    fn transcendental_rules() {
        let x = Dual::<1>::new(0.4, [1.0]);
        for (got, f) in [
            (x.ln(), f64::ln as fn(f64) -> f64),
            (x.sqrt(), f64::sqrt),
            (x.cos(), f64::cos),
            (x.tanh(), f64::tanh),
        ] {
            assert!((got.du[0] - fd(f, 0.4)).abs() < 1e-8);
        }
    }
}
