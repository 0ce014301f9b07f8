//! Second-order spatial jets (value, gradient, Hessian) in one or two input
//! dimensions.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::real::{Real, Scalar};

/// Value together with its first and second spatial derivatives.
///
/// Only the leading `dim` entries of `d1` and the leading `dim × dim` block of
/// `d2` carry meaning; the rest stay zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub dim: usize,
    pub value: T,
    pub d1: [T; 2],
    pub d2: [[T; 2]; 2],
}

impl<T: Real> Jet<T> {
    pub fn constant(dim: usize, value: T) -> Self {
        Self { dim, value, d1: [T::zero(); 2], d2: [[T::zero(); 2]; 2] }
    }

    /// The coordinate function `x_axis` seeded as an independent variable.
    pub fn variable(dim: usize, value: T, axis: usize) -> Self {
        let mut jet = Self::constant(dim, value);
        jet.d1[axis] = T::one();
        jet
    }

    /// Seeds every coordinate of `point` as an independent variable.
    pub fn coordinates(point: &[f64]) -> Vec<Self> {
        let dim = point.len();
        point
            .iter()
            .enumerate()
            .map(|(k, &x)| Self::variable(dim, T::from_f64(x), k))
            .collect()
    }

    /// `f(self)` given f, f' and f'' at the value.
    #[inline]
    pub fn chain(self, f: T, df: T, d2f: T) -> Self {
        let mut out = Self::constant(self.dim, f);
        for k in 0..self.dim {
            out.d1[k] = df * self.d1[k];
        }
        for k in 0..self.dim {
            for l in 0..self.dim {
                out.d2[k][l] = df * self.d2[k][l] + d2f * self.d1[k] * self.d1[l];
            }
        }
        out
    }

    pub fn laplacian(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, k| acc + self.d2[k][k])
    }

    fn zip(self, rhs: Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        out.value = f(self.value, rhs.value);
        for k in 0..2 {
            out.d1[k] = f(self.d1[k], rhs.d1[k]);
            for l in 0..2 {
                out.d2[k][l] = f(self.d2[k][l], rhs.d2[k][l]);
            }
        }
        out
    }

    fn map(self, f: impl Fn(T) -> T) -> Self {
        let mut out = self;
        out.value = f(self.value);
        for k in 0..2 {
            out.d1[k] = f(self.d1[k]);
            for l in 0..2 {
                out.d2[k][l] = f(self.d2[k][l]);
            }
        }
        out
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let dim = self.dim;
        let mut out = Self::constant(dim, self.value * rhs.value);
        for k in 0..dim {
            out.d1[k] = self.value * rhs.d1[k] + rhs.value * self.d1[k];
        }
        for k in 0..dim {
            for l in 0..dim {
                out.d2[k][l] = self.value * rhs.d2[k][l]
                    + rhs.value * self.d2[k][l]
                    + self.d1[k] * rhs.d1[l]
                    + self.d1[l] * rhs.d1[k];
            }
        }
        out
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = T::one() / rhs.value;
        let recip = rhs.chain(inv, -inv * inv, T::from_f64(2.0) * inv * inv * inv);
        self * recip
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|a| -a)
    }
}

impl<T: Real> Add<f64> for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value = self.value + rhs;
        self
    }
}

impl<T: Real> Sub<f64> for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.value = self.value - rhs;
        self
    }
}

impl<T: Real> Mul<f64> for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.map(|a| a * rhs)
    }
}

impl<T: Real> Div<f64> for Jet<T> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.map(|a| a / rhs)
    }
}

impl<T: Real> Scalar for Jet<T> {
    fn primal(&self) -> f64 {
        self.value.primal()
    }

    fn constant_like(&self, c: f64) -> Self {
        Self::constant(self.dim, T::from_f64(c))
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        let s = T::one() - t * t;
        self.chain(t, s, T::from_f64(-2.0) * t * s)
    }

    fn ln(self) -> Self {
        let inv = T::one() / self.value;
        self.chain(self.value.ln(), inv, -inv * inv)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn sin(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }

    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        let inv = T::one() / r;
        self.chain(r, inv * 0.5, -(inv * inv * inv) * 0.25)
    }
}
