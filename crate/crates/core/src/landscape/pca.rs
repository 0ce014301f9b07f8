use serde::Serialize;

use crate::autodiff::eig_symmetric;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::optimize::TrajectoryRecord;

#[derive(Clone, Debug, Serialize)]
pub struct PcaBasis {
    #[serde(skip)]
    pub mean: Vec<f64>,
    /// Unit, mutually orthogonal; largest variance first.
    #[serde(skip)]
    pub components: Vec<Vec<f64>>,
    pub explained: Vec<f64>,
    pub total_variance: f64,
}

impl PcaBasis {
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = theta.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.components.iter().map(|v| dot(v, &centered)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct PcaTrajectory {
    pub basis: PcaBasis,
    /// Row t holds θ_t's coordinates along the components.
    pub coordinates: Matrix,
}

/// Principal components of the snapshots θ₀ … θ_T about their mean.
///
/// The parameter covariance is accumulated in one pass over the snapshots
/// (they may live on disk) and diagonalized densely. A constant trajectory
/// yields no components.
pub fn pca_trajectory(trajectory: &TrajectoryRecord, q: usize) -> Result<PcaTrajectory> {
    if !trajectory.has_snapshots() {
        return Err(Error::Contract("principal components need every epoch's snapshot".into()));
    }
    let samples = trajectory.snapshots.len();
    if samples < q {
        return Err(Error::Contract(format!("{samples} snapshots cannot give {q} components")));
    }
    let n = trajectory.snapshots.dim();
    let mut mean = vec![0.0; n];
    trajectory.snapshots.for_each(|_, theta| mean.iter_mut().zip(theta).for_each(|(m, x)| *m += x))?;
    mean.iter_mut().for_each(|m| *m /= samples as f64);

    let mut cov = Matrix::zeros(n, n);
    let mut centered = vec![0.0; n];
    trajectory.snapshots.for_each(|_, theta| {
        for i in 0..n {
            centered[i] = theta[i] - mean[i];
        }
        for i in 0..n {
            let ci = centered[i];
            if ci != 0.0 {
                let row = &mut cov.row_mut(i)[..=i];
                for (r, &cj) in row.iter_mut().zip(&centered[..=i]) {
                    *r += ci * cj;
                }
            }
        }
    })?;
    for i in 0..n {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let total_variance = cov.trace();
    let mut basis = PcaBasis { mean, components: Vec::new(), explained: Vec::new(), total_variance };
    if total_variance > 0.0 {
        let eig = eig_symmetric(&cov)?;
        for k in (0..n).rev().take(q) {
            let lambda = eig.values[k].max(0.0);
            let mut v = eig.vector(k);
            let big = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            basis.components.push(v);
            basis.explained.push(lambda / total_variance);
        }
    }
    let mut coordinates = Matrix::zeros(samples, basis.components.len());
    trajectory.snapshots.for_each(|t, theta| coordinates.row_mut(t).copy_from_slice(&basis.project(theta)))?;
    Ok(PcaTrajectory { basis, coordinates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Quadratic;
    use crate::linalg::norm;
    use crate::optimize::{train, OptimizerConfig};

    fn record_of(rows: &[Vec<f64>]) -> TrajectoryRecord {
        // a record of the right length, with its snapshots replaced
        let q = Quadratic::new(Matrix::identity(rows[0].len()));
        let mut cfg = OptimizerConfig::gd(0.1, rows.len() - 1);
        cfg.keep_snapshots = true;
        let mut run = train(&q, &rows[0], &cfg).unwrap();
        run.snapshots = crate::optimize::SnapshotStore::new(rows[0].len(), 1 << 20);
        for r in rows {
            run.snapshots.push(r).unwrap();
        }
        run
    }

    #[test]
    fn linear_trajectory_has_one_component() {
        let d = [0.3, -0.4, 1.2];
        let rows: Vec<Vec<f64>> = (0..20).map(|t| d.iter().map(|x| 1.0 + t as f64 * x).collect()).collect();
        let pca = pca_trajectory(&record_of(&rows), 2).unwrap();
        assert!((pca.basis.explained[0] - 1.0).abs() < 1e-12);
        assert!(pca.basis.explained[1].abs() < 1e-12);
        let u = &pca.basis.components[0];
        assert!((dot(u, &d).abs() / norm(&d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fractions_are_ordered_and_constant_runs_have_none() {
        let rows: Vec<Vec<f64>> = (0..30).map(|t| {
            let t = t as f64;
            vec![t, (t * 0.7).sin(), 0.1 * t * t, (0.3 * t).cos()]
        }).collect();
        let pca = pca_trajectory(&record_of(&rows), 4).unwrap();
        let f = &pca.basis.explained;
        assert!(f.windows(2).all(|w| w[0] >= w[1]));
        assert!(f.iter().all(|&x| (0.0..=1.0).contains(&x)) && f.iter().sum::<f64>() <= 1.0 + 1e-12);

        let flat = pca_trajectory(&record_of(&vec![vec![1.0, 2.0]; 5]), 2).unwrap();
        assert!(flat.basis.components.is_empty());
        assert_eq!(flat.basis.total_variance, 0.0);
    }
}
