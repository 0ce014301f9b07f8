use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Differentiable};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optimize::TrajectoryRecord;

pub const HISTOGRAM_SHIFT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    /// Every `sample_every` epochs plus the last.
    #[default]
    Full,
    /// First and last epoch only, for objectives whose Hessian is too
    /// expensive to assemble along the whole run.
    Endpoints,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumHistory {
    pub epochs: Vec<usize>,
    /// Ascending eigenvalues per sampled epoch.
    pub eigenvalues: Vec<Vec<f64>>,
    pub lambda_max: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub mode: SpectrumMode,
}

impl SpectrumHistory {
    pub fn first(&self) -> &[f64] {
        &self.eigenvalues[0]
    }

    pub fn last(&self) -> &[f64] {
        self.eigenvalues.last().expect("at least one sample")
    }

    /// Fraction of the final spectrum with |λ| < `rel`·λ_max.
    pub fn final_concentration(&self, rel: f64) -> f64 {
        concentration(self.last(), rel)
    }
}

pub fn concentration(values: &[f64], rel: f64) -> f64 {
    let lmax = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    values.iter().filter(|v| v.abs() < rel * lmax).count() as f64 / values.len().max(1) as f64
}

pub fn sampled_epochs(epochs: usize, sample_every: usize, mode: SpectrumMode) -> Vec<usize> {
    let mut out: Vec<usize> = match mode {
        SpectrumMode::Full => (0..=epochs).step_by(sample_every.max(1)).collect(),
        SpectrumMode::Endpoints => vec![0],
    };
    if *out.last().unwrap() != epochs {
        out.push(epochs);
    }
    out
}

/// Hessian eigenvalues along a recorded trajectory.
pub fn spectrum_evolution(f: &dyn Differentiable, trajectory: &TrajectoryRecord, sample_every: usize, mode: SpectrumMode) -> Result<SpectrumHistory> {
    let epochs = sampled_epochs(trajectory.epochs(), sample_every, mode);
    let mut history = SpectrumHistory { epochs: Vec::new(), eigenvalues: Vec::new(), lambda_max: Vec::new(), lambda_min: Vec::new(), mode };
    for &t in &epochs {
        let theta = if t == trajectory.epochs() { trajectory.final_params.clone() } else { trajectory.params_at(t)? };
        let values = autodiff::hessian(f, &theta)?.eigenvalues()?;
        if values.len() != f.dim() {
            return Err(Error::Numerical("eigenvalue count differs from the parameter count".into()));
        }
        history.lambda_min.push(values[0]);
        history.lambda_max.push(*values.last().unwrap());
        history.eigenvalues.push(values);
        history.epochs.push(t);
    }
    Ok(history)
}

/// Counts of log₁₀(|λ| + shift) per sampled epoch.
#[derive(Clone, Debug)]
pub struct SpectrumHistogram {
    /// `bins + 1` edges in log₁₀ units.
    pub edges: Vec<f64>,
    /// Rows are sampled epochs, columns bins.
    pub counts: Matrix,
}

pub fn spectrum_histogram(history: &SpectrumHistory, bins: usize, shift: f64) -> Result<SpectrumHistogram> {
    if bins == 0 || !(shift > 0.0) {
        return Err(Error::Config("histogram needs bins ≥ 1 and a positive shift".into()));
    }
    let logs: Vec<Vec<f64>> = history.eigenvalues.iter().map(|vals| vals.iter().map(|v| (v.abs() + shift).log10()).collect()).collect();
    let lo = shift.log10();
    let hi = logs.iter().flatten().fold(lo, |m, &v| m.max(v)).ceil().max(lo + 1.0);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|b| lo + width * b as f64).collect();
    let mut counts = Matrix::zeros(logs.len(), bins);
    for (row, vals) in logs.iter().enumerate() {
        for &v in vals {
            let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[(row, b)] += 1.0;
        }
    }
    Ok(SpectrumHistogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Quadratic;
    use crate::optimize::{train, OptimizerConfig};

    #[test]
    fn quadratic_spectrum_is_constant() {
        let q = Quadratic::new(Matrix::diagonal(&[0.5, 2.0, 1e-3]));
        let mut cfg = OptimizerConfig::gd(0.1, 30);
        cfg.keep_snapshots = true;
        let run = train(&q, &[1.0, 1.0, 1.0], &cfg).unwrap();
        let history = spectrum_evolution(&q, &run, 10, SpectrumMode::Full).unwrap();
        assert_eq!(history.epochs, vec![0, 10, 20, 30]);
        for vals in &history.eigenvalues {
            assert_eq!(vals, history.first());
        }
        let endpoints = spectrum_evolution(&q, &run, 10, SpectrumMode::Endpoints).unwrap();
        assert_eq!(endpoints.epochs, vec![0, 30]);

        let hist = spectrum_histogram(&history, 20, HISTOGRAM_SHIFT).unwrap();
        for row in 0..4 {
            assert_eq!(hist.counts.row(row).iter().sum::<f64>(), 3.0);
            assert_eq!(hist.counts.row(row), hist.counts.row(0));
        }
    }

    #[test]
    fn concentration_counts_small_eigenvalues() {
        assert_eq!(concentration(&[-1e-9, 0.0, 1e-8, 1.0], 1e-6), 0.75);
        assert_eq!(sampled_epochs(7, 5, SpectrumMode::Full), vec![0, 5, 7]);
    }
}
