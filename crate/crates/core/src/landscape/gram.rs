use serde::Serialize;

use crate::autodiff::eig_symmetric;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{BasisSet, NetworkSpec};

#[derive(Clone, Debug, Serialize)]
pub struct GramAnalysis {
    #[serde(skip)]
    pub gram: Matrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub rel_threshold: f64,
    /// Eigenvectors (as columns) of the eigenvalues at or below the
    /// threshold.
    #[serde(skip)]
    null_space: Vec<Vec<f64>>,
}

/// `G_ij = Σ_p w_p h_i(x_p) h_j(x_p)`.
pub fn gram_matrix(basis: &BasisSet, weights: &[f64]) -> Result<Matrix> {
    let h = &basis.values;
    if weights.len() != h.rows() {
        return Err(Error::Dimension { what: "quadrature weights", expected: h.rows(), got: weights.len() });
    }
    let n = h.cols();
    let mut g = Matrix::zeros(n, n);
    for (p, &w) in weights.iter().enumerate() {
        let row = h.row(p);
        for i in 0..n {
            let wi = w * row[i];
            for j in 0..=i {
                g[(i, j)] += wi * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    Ok(g)
}

/// Number of Gram eigenvalues above `rel_threshold · λ_max`.
pub fn gram_rank(basis: &BasisSet, weights: &[f64], rel_threshold: f64) -> Result<GramAnalysis> {
    let gram = gram_matrix(basis, weights)?;
    let eig = eig_symmetric(&gram)?;
    let lmax = eig.values.last().copied().unwrap_or(0.0);
    let rank = eig.values.iter().filter(|&&l| l > rel_threshold * lmax).count();
    let null_space = (0..eig.values.len() - rank).map(|k| eig.vector(k)).collect();
    Ok(GramAnalysis { gram, eigenvalues: eig.values, rank, rel_threshold, null_space })
}

#[derive(Clone, Debug, Serialize)]
pub struct NullDirection {
    /// Full parameter vector `[Δ, 0]`: Δ in the outer weights of output 0.
    #[serde(skip)]
    pub direction: Vec<f64>,
    pub delta: Vec<f64>,
    /// ‖HΔ‖ / ‖Hθ^O‖ in the quadrature norm.
    pub relative_field_change: f64,
    pub gram_eigenvalue: f64,
}

/// Outer-layer direction that leaves the field unchanged on the grid.
///
/// Without `derivatives` this is the Gram eigenvector of smallest
/// eigenvalue. Eigenvalues under the threshold are all round-off, so when
/// there are several, the choice among them is arbitrary; given the basis
/// derivatives the objective sees, the direction is instead the unit
/// combination of those eigenvectors that changes the derivatives least.
pub fn null_direction(spec: &NetworkSpec, params: &[f64], basis: &BasisSet, weights: &[f64], gram: &GramAnalysis, derivatives: &[Matrix]) -> Result<NullDirection> {
    if gram.rank >= basis.size() {
        return Err(Error::NoNullDirection);
    }
    let layout = spec.layout();
    if basis.size() != spec.basis_size() {
        return Err(Error::Dimension { what: "basis functions", expected: spec.basis_size(), got: basis.size() });
    }
    if params.len() != layout.total {
        return Err(Error::Dimension { what: "parameters", expected: layout.total, got: params.len() });
    }
    let delta = if derivatives.is_empty() || gram.null_space.len() == 1 {
        gram.null_space[0].clone()
    } else {
        least_derivative_change(&gram.null_space, derivatives, weights)?
    };
    let out = layout.output_layer();
    let mut direction = vec![0.0; layout.total];
    direction[out.weights.start..out.weights.start + out.fan_in].copy_from_slice(&delta);
    let coefficients = &params[out.weights.start..out.weights.start + out.fan_in];
    let relative_field_change = field_change(basis, weights, coefficients, &delta);
    Ok(NullDirection { direction, delta, relative_field_change, gram_eigenvalue: gram.eigenvalues[0] })
}

fn least_derivative_change(null_space: &[Vec<f64>], derivatives: &[Matrix], weights: &[f64]) -> Result<Vec<f64>> {
    let k = null_space.len();
    // images of the null vectors under every derivative matrix
    let images: Vec<Vec<f64>> = null_space.iter().map(|v| derivatives.iter().flat_map(|d| d.matvec(v)).collect()).collect();
    let w: Vec<f64> = derivatives.iter().flat_map(|_| weights.iter().copied()).collect();
    let m = Matrix::from_fn(k, k, |a, b| images[a].iter().zip(&images[b]).zip(&w).map(|((x, y), wi)| wi * x * y).sum());
    let eig = eig_symmetric(&m)?;
    let c = eig.vector(0);
    let mut delta = vec![0.0; null_space[0].len()];
    for (v, &ck) in null_space.iter().zip(&c) {
        crate::linalg::axpy(ck, v, &mut delta);
    }
    Ok(crate::linalg::normalized(&delta).expect("orthonormal combination is nonzero"))
}

/// ‖HΔ‖ / ‖Hc‖ in the quadrature norm for a basis `H`, coefficients `c`.
pub fn field_change(basis: &BasisSet, weights: &[f64], coefficients: &[f64], delta: &[f64]) -> f64 {
    let hd = basis.combine(delta);
    let hc = basis.combine(coefficients);
    let num: f64 = hd.iter().zip(weights).map(|(x, w)| w * x * x).sum();
    let den: f64 = hc.iter().zip(weights).map(|(x, w)| w * x * x).sum();
    (num / den).sqrt()
}
