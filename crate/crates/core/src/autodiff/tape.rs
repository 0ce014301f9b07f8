//! Scalar reverse-mode tape.
//!
//! Every operation on a [`Var`] appends a node holding at most two parent
//! indices and the local partial derivatives. A reverse sweep over the node
//! list accumulates adjoints. The tape is generic over the value type, so
//! recording on [`Dual`](super::real::Dual) values and sweeping backwards
//! gives forward-over-reverse second derivatives.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::real::{Real, Scalar};

const NO_PARENT: usize = usize::MAX;

#[derive(Clone, Copy, Debug)]
struct Node<T> {
    parents: [usize; 2],
    partials: [T; 2],
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    idx: usize,
    value: T,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { nodes: RefCell::new(Vec::with_capacity(n)) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all recorded nodes, keeping the allocation. Requires that no
    /// [`Var`] of this tape is still alive.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    pub fn var(&self, value: T) -> Var<'_, T> {
        self.push(value, [NO_PARENT; 2], [T::zero(); 2])
    }

    fn push(&self, value: T, parents: [usize; 2], partials: [T; 2]) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, partials });
        Var { tape: self, idx: nodes.len() - 1, value }
    }

    fn unary(&self, a: &Var<'_, T>, value: T, da: T) -> Var<'_, T> {
        self.push(value, [a.idx, NO_PARENT], [da, T::zero()])
    }

    fn binary(&self, a: &Var<'_, T>, b: &Var<'_, T>, value: T, da: T, db: T) -> Var<'_, T> {
        self.push(value, [a.idx, b.idx], [da, db])
    }

    /// Adjoints of every node with respect to `output`.
    pub fn adjoints(&self, output: &Var<'_, T>) -> Vec<T> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![T::zero(); nodes.len()];
        adj[output.idx] = T::one();
        for i in (0..=output.idx).rev() {
            let a = adj[i];
            let node = &nodes[i];
            for (&p, &d) in node.parents.iter().zip(node.partials.iter()) {
                if p != NO_PARENT {
                    adj[p] += a * d;
                }
            }
        }
        adj
    }

    /// Gradient of `output` with respect to the listed variables.
    pub fn gradient(&self, output: &Var<'_, T>, wrt: &[Var<'_, T>]) -> Vec<T> {
        let adj = self.adjoints(output);
        wrt.iter().map(|v| adj[v.idx]).collect()
    }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn value(&self) -> T {
        self.value
    }

    pub fn index(&self) -> usize {
        self.idx
    }
}

impl<'t, T: Real> Add for Var<'t, T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.tape.binary(&self, &rhs, self.value + rhs.value, T::one(), T::one())
    }
}

impl<'t, T: Real> Sub for Var<'t, T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.tape.binary(&self, &rhs, self.value - rhs.value, T::one(), -T::one())
    }
}

impl<'t, T: Real> Mul for Var<'t, T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.tape.binary(&self, &rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t, T: Real> Div for Var<'t, T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = T::one() / rhs.value;
        let q = self.value * inv;
        self.tape.binary(&self, &rhs, q, inv, -q * inv)
    }
}

impl<'t, T: Real> Neg for Var<'t, T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.tape.unary(&self, -self.value, -T::one())
    }
}

impl<'t, T: Real> Add<f64> for Var<'t, T> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.tape.unary(&self, self.value + rhs, T::one())
    }
}

impl<'t, T: Real> Sub<f64> for Var<'t, T> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.tape.unary(&self, self.value - rhs, T::one())
    }
}

impl<'t, T: Real> Mul<f64> for Var<'t, T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.tape.unary(&self, self.value * rhs, T::from_f64(rhs))
    }
}

impl<'t, T: Real> Div<f64> for Var<'t, T> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.tape.unary(&self, self.value / rhs, T::from_f64(1.0 / rhs))
    }
}

impl<'t, T: Real> Scalar for Var<'t, T> {
    fn primal(&self) -> f64 {
        self.value.primal()
    }

    fn constant_like(&self, c: f64) -> Self {
        self.tape.var(T::from_f64(c))
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.tape.unary(&self, t, T::one() - t * t)
    }

    fn ln(self) -> Self {
        self.tape.unary(&self, self.value.ln(), T::one() / self.value)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.tape.unary(&self, e, e)
    }

    fn sin(self) -> Self {
        self.tape.unary(&self, self.value.sin(), self.value.cos())
    }

    fn cos(self) -> Self {
        self.tape.unary(&self, self.value.cos(), -self.value.sin())
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.tape.unary(&self, s, T::from_f64(0.5) / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::real::Dual;

    fn rosenbrock<S: Scalar>(x: S, y: S) -> S {
        let a = -x + 1.0;
        let b = y - x * x;
        a * a + b * b * 100.0
    }

    #[test]
    fn gradient_of_rosenbrock() {
        let tape = Tape::<f64>::new();
        let (x, y) = (tape.var(-1.2), tape.var(1.0));
        let f = rosenbrock(x, y);
        let g = tape.gradient(&f, &[x, y]);
        let gx = -2.0 * (1.0 - -1.2) - 400.0 * -1.2 * (1.0 - 1.44);
        let gy = 200.0 * (1.0 - 1.44);
        assert!((g[0] - gx).abs() < 1e-12);
        assert!((g[1] - gy).abs() < 1e-12);
    }

    #[test]
    fn forward_over_reverse_gives_hessian_columns() {
        let tape = Tape::<Dual<2>>::new();
        let x = tape.var(Dual::new(0.5, [1.0, 0.0]));
        let y = tape.var(Dual::new(0.2, [0.0, 1.0]));
        let f = rosenbrock(x, y);
        let g = tape.gradient(&f, &[x, y]);
        // H = [[2 - 400 y + 1200 x^2, -400 x], [-400 x, 200]]
        let h = [[2.0 - 80.0 + 300.0, -200.0], [-200.0, 200.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[i].du[j] - h[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        let tape = Tape::<f64>::new();
        let x = tape.var(0.3);
        let s = x.sin();
        let f = s * s + s.ln() - (x / 2.0).exp() + x.sqrt() * x.tanh();
        let g = tape.gradient(&f, &[x])[0];
        let h = 1e-6;
        let ff = |x: f64| x.sin().powi(2) + x.sin().ln() - (x / 2.0).exp() + x.sqrt() * x.tanh();
        assert!((g - (ff(0.3 + h) - ff(0.3 - h)) / (2.0 * h)).abs() < 1e-8);
    }
}
