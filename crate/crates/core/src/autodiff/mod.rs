//! Differentiation engine.
//!
//! Spatial derivatives of network outputs use forward-mode jets. Parameter
//! gradients come from reverse sweeps (the layer-level backward pass in
//! [`crate::network`] plus a scalar [`Tape`] for pointwise integrands). Second
//! parameter derivatives run the same reverse code on [`Dual`] numbers whose
//! lanes carry tangent directions, so one pass yields several Hessian-vector
//! products at once.

pub mod eigen;
mod jet;
mod real;
mod tape;

use rayon::prelude::*;

pub use eigen::{eig_symmetric, eigvals_symmetric, min_abs_eigenpair, SymmetricEigen};
pub use jet::Jet;
pub use real::{Dual, Real, Scalar};
pub use tape::{Tape, Var};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Tangent lanes carried per forward-over-reverse pass.
pub const LANES: usize = 8;

/// A scalar function of a parameter vector with first and second derivatives.
pub trait Differentiable: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Hessian-vector products `H(x) v` for up to [`LANES`] directions.
    fn hvp_batch(&self, x: &[f64], directions: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_grad(x)?.1)
    }
}

/// Splits tangent directions into dual-number seeds: entry `i` of the result
/// holds component `i` of every direction.
pub fn seed_lanes(x: &[f64], directions: &[Vec<f64>]) -> Result<Vec<Dual<LANES>>> {
    if directions.len() > LANES {
        return Err(Error::Contract(format!("at most {LANES} directions per pass, got {}", directions.len())));
    }
    for d in directions {
        if d.len() != x.len() {
            return Err(Error::Dimension { what: "tangent direction", expected: x.len(), got: d.len() });
        }
    }
    Ok(x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut du = [0.0; LANES];
            for (lane, d) in directions.iter().enumerate() {
                du[lane] = d[i];
            }
            Dual::new(xi, du)
        })
        .collect())
}

/// Reads the tangent lanes of a dual-valued gradient back into vectors.
pub fn unseed_lanes(grad: &[Dual<LANES>], count: usize) -> Vec<Vec<f64>> {
    (0..count).map(|lane| grad.iter().map(|g| g.du[lane]).collect()).collect()
}

pub fn hessian_vector_product(f: &dyn Differentiable, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    Ok(f.hvp_batch(x, &[v.to_vec()])?.remove(0))
}

/// Dense Hessian; column `j` is `H e_j`.
#[derive(Clone, Debug)]
pub struct HessianMatrix {
    pub matrix: Matrix,
}

impl HessianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// max |H − Hᵀ| / max |H| (zero for the zero matrix).
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.matrix.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            self.matrix.asymmetry() / scale
        }
    }

    pub fn eigen(&self) -> Result<SymmetricEigen> {
        eig_symmetric(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigvals_symmetric(&self.matrix)
    }
}

/// Assembles the Hessian from Hessian-vector products against unit vectors,
/// [`LANES`] columns per pass, passes distributed over the rayon pool.
pub fn hessian(f: &dyn Differentiable, x: &[f64]) -> Result<HessianMatrix> {
    let n = f.dim();
    if x.len() != n {
        return Err(Error::Dimension { what: "parameter vector length", expected: n, got: x.len() });
    }
    let starts: Vec<usize> = (0..n).step_by(LANES).collect();
    let blocks: Vec<(usize, Vec<Vec<f64>>)> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + LANES).min(n);
            let dirs: Vec<Vec<f64>> = (start..end)
                .map(|j| {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    e
                })
                .collect();
            f.hvp_batch(x, &dirs).map(|cols| (start, cols))
        })
        .collect::<Result<_>>()?;
    let mut matrix = Matrix::zeros(n, n);
    for (start, cols) in blocks {
        for (k, col) in cols.iter().enumerate() {
            matrix.set_column(start + k, col);
        }
    }
    Ok(HessianMatrix { matrix })
}

/// `½ xᵀ A x + bᵀ x`, the closed-form test objective.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl Quadratic {
    pub fn new(a: Matrix) -> Self {
        let n = a.rows();
        Self { a, b: vec![0.0; n] }
    }
}

impl Differentiable for Quadratic {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let ax = self.a.matvec(x);
        Ok(0.5 * crate::linalg::dot(x, &ax) + crate::linalg::dot(&self.b, x))
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let ax = self.a.matvec(x);
        let value = 0.5 * crate::linalg::dot(x, &ax) + crate::linalg::dot(&self.b, x);
        Ok((value, crate::linalg::add(&ax, &self.b)))
    }

    fn hvp_batch(&self, _x: &[f64], directions: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(directions.iter().map(|d| self.a.matvec(d)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_hessian_is_exact() {
        let a = Matrix::from_rows(3, 3, vec![4.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 2.0]);
        let q = Quadratic::new(a.clone());
        let h = hessian(&q, &[0.3, -0.2, 1.0]).unwrap();
        assert_eq!(h.matrix, a);
        assert_eq!(h.relative_asymmetry(), 0.0);
        assert_eq!(q.gradient(&[1.0, 0.0, 0.0]).unwrap(), vec![4.0, 1.0, 0.0]);
    }

    #[test]
    fn lane_seeding_roundtrip() {
        let x = [1.0, 2.0];
        let dirs = vec![vec![1.0, 0.0], vec![0.5, -1.0]];
        let seeded = seed_lanes(&x, &dirs).unwrap();
        assert_eq!(seeded[1].re, 2.0);
        assert_eq!(unseed_lanes(&seeded, 2), dirs);
        assert!(seed_lanes(&x, &vec![vec![0.0; 2]; LANES + 1]).is_err());
    }
}
