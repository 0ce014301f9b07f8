use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Differentiable;
use crate::error::{Error, Result};
use crate::linalg::{normalized, Matrix};
use crate::problems::Objective;
use crate::rng::{self, StreamRng};

/// Coordinates along one plane axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

impl Axis {
    pub fn symmetric(half_width: f64, resolution: usize) -> Self {
        Self { lo: -half_width, hi: half_width, resolution }
    }

    /// A single sample sits at the middle of the range.
    pub fn coordinates(&self) -> Vec<f64> {
        match self.resolution {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            n => (0..n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

impl Default for Axis {
    fn default() -> Self {
        Self::symmetric(1.0, 51)
    }
}

/// `loss[m][n] = L(center + ε_k[m] V_k + ε_j[n] V_j)`; non-finite cells hold
/// NaN and are `false` in `finite`.
#[derive(Clone, Debug)]
pub struct PlaneGrid {
    pub center: Vec<f64>,
    pub direction_k: Vec<f64>,
    pub direction_j: Vec<f64>,
    pub eps_k: Vec<f64>,
    pub eps_j: Vec<f64>,
    pub losses: Matrix,
    pub finite: Vec<bool>,
}

impl PlaneGrid {
    pub fn point(&self, m: usize, n: usize) -> Vec<f64> {
        plane_point(&self.center, &self.direction_k, &self.direction_j, self.eps_k[m], self.eps_j[n])
    }

    pub fn finite_count(&self) -> usize {
        self.finite.iter().filter(|&&b| b).count()
    }

    /// Mask as 0/1 values in the loss matrix's layout.
    pub fn mask_matrix(&self) -> Matrix {
        Matrix::from_rows(self.eps_k.len(), self.eps_j.len(), self.finite.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }
}

fn plane_point(center: &[f64], vk: &[f64], vj: &[f64], a: f64, b: f64) -> Vec<f64> {
    (0..center.len()).map(|i| center[i] + a * vk[i] + b * vj[i]).collect()
}

/// Evaluates `loss(θ, cell)` over the plane, where `cell = m·|ε_j| + n` is
/// the row-major cell index. Cells run in parallel.
pub fn plane_scan_with(center: &[f64], vk: &[f64], vj: &[f64], axis_k: &Axis, axis_j: &Axis, loss: impl Fn(&[f64], usize) -> Result<f64> + Sync) -> Result<PlaneGrid> {
    if vk.len() != center.len() || vj.len() != center.len() {
        return Err(Error::Dimension { what: "plane direction", expected: center.len(), got: vk.len().min(vj.len()) });
    }
    let vk = normalized(vk).ok_or_else(|| Error::Contract("plane direction V_k is zero".into()))?;
    let vj = normalized(vj).ok_or_else(|| Error::Contract("plane direction V_j is zero".into()))?;
    let eps_k = axis_k.coordinates();
    let eps_j = axis_j.coordinates();
    let cols = eps_j.len();
    let values: Vec<f64> = (0..eps_k.len() * cols)
        .into_par_iter()
        .map(|cell| {
            let theta = plane_point(center, &vk, &vj, eps_k[cell / cols], eps_j[cell % cols]);
            match loss(&theta, cell) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Ok(f64::NAN),
                Err(e) if e.is_non_finite() => Ok(f64::NAN),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let finite = values.iter().map(|v| v.is_finite()).collect();
    Ok(PlaneGrid { center: center.to_vec(), direction_k: vk, direction_j: vj, losses: Matrix::from_rows(eps_k.len(), cols, values), finite, eps_k, eps_j })
}

pub fn plane_scan(f: &dyn Differentiable, center: &[f64], vk: &[f64], vj: &[f64], axis_k: &Axis, axis_j: &Axis) -> Result<PlaneGrid> {
    plane_scan_with(center, vk, vj, axis_k, axis_j, |theta, _| f.value(theta))
}

/// Plane scan of the Monte Carlo objective: every cell draws a fresh batch
/// from its own stream, so the result does not depend on scheduling.
pub fn stochastic_plane_scan(objective: &Objective, seed: u64, center: &[f64], vk: &[f64], vj: &[f64], axis_k: &Axis, axis_j: &Axis) -> Result<PlaneGrid> {
    plane_scan_with(center, vk, vj, axis_k, axis_j, |theta, cell| {
        let mut rng = rng::substream(seed, "stochastic_scan", cell as u64);
        objective.evaluate_stochastic(theta, &mut rng)
    })
}

/// Gaussian direction normalized to unit length.
pub fn random_direction(dim: usize, rng: &mut StreamRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}
