use rand_distr::{Distribution, StandardNormal};

use super::{train, OptimizerConfig, TrainTarget, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Matrix};
use crate::rng::StreamRng;

/// Affine embedding `θ = θ₀ + P z` of a `d`-dimensional coordinate space.
#[derive(Clone, Debug)]
pub struct SubspaceMap {
    pub offset: Vec<f64>,
    /// Row `k` is column `k` of P.
    pub columns: Matrix,
}

impl SubspaceMap {
    /// Gaussian columns scaled to unit length; optionally Gram–Schmidt
    /// orthonormalized.
    pub fn random(offset: Vec<f64>, d: usize, rng: &mut StreamRng, orthonormalize: bool) -> Result<Self> {
        let n = offset.len();
        if d == 0 || d > n {
            return Err(Error::Config(format!("subspace dimension must be in 1..={n}, got {d}")));
        }
        let mut columns = Matrix::zeros(d, n);
        for k in 0..d {
            let row = columns.row_mut(k);
            for v in row.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let nrm = norm(row);
            row.iter_mut().for_each(|v| *v /= nrm);
        }
        let mut map = Self { offset, columns };
        if orthonormalize {
            map.columns = orthonormal_rows(&map.columns)?;
        }
        Ok(map)
    }

    /// P = I.
    pub fn identity(offset: Vec<f64>) -> Self {
        let n = offset.len();
        Self { offset, columns: Matrix::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.columns.rows()
    }

    pub fn embed(&self, z: &[f64]) -> Vec<f64> {
        let mut theta = self.offset.clone();
        for (k, &zk) in z.iter().enumerate() {
            if zk != 0.0 {
                axpy(zk, self.columns.row(k), &mut theta);
            }
        }
        theta
    }

    /// Pᵀ g.
    pub fn pull_back(&self, grad: &[f64]) -> Vec<f64> {
        self.columns.matvec(grad)
    }

    /// Norm of the part of `theta − θ₀` outside the column space of P.
    pub fn range_residual(&self, theta: &[f64]) -> Result<f64> {
        let q = orthonormal_rows(&self.columns)?;
        let mut delta: Vec<f64> = theta.iter().zip(&self.offset).map(|(a, b)| a - b).collect();
        for k in 0..q.rows() {
            let c = dot(q.row(k), &delta);
            axpy(-c, q.row(k), &mut delta);
        }
        Ok(norm(&delta))
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
fn orthonormal_rows(m: &Matrix) -> Result<Matrix> {
    let mut q = m.clone();
    for k in 0..q.rows() {
        for _pass in 0..2 {
            for j in 0..k {
                let c = dot(q.row(j), q.row(k));
                let prev = q.row(j).to_vec();
                axpy(-c, &prev, q.row_mut(k));
            }
        }
        let nrm = norm(q.row(k));
        if nrm < 1e-12 {
            return Err(Error::Numerical("subspace columns are linearly dependent".into()));
        }
        q.row_mut(k).iter_mut().for_each(|v| *v /= nrm);
    }
    Ok(q)
}

struct SubspaceTarget<'a> {
    inner: &'a dyn TrainTarget,
    map: &'a SubspaceMap,
}

impl TrainTarget for SubspaceTarget<'_> {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn step_value_and_grad(&self, z: &[f64], rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        let (loss, grad) = self.inner.step_value_and_grad(&self.map.embed(z), rng)?;
        Ok((loss, self.map.pull_back(&grad)))
    }

    fn recorded_loss(&self, z: &[f64], step_loss: f64) -> Result<f64> {
        self.inner.recorded_loss(&self.map.embed(z), step_loss)
    }

    fn loss(&self, z: &[f64]) -> Result<f64> {
        self.inner.loss(&self.map.embed(z))
    }
}

/// A subspace run: the trajectory in z-coordinates and the embedding.
#[derive(Debug)]
pub struct SubspaceRun {
    pub map: SubspaceMap,
    pub z: TrajectoryRecord,
}

impl SubspaceRun {
    pub fn theta_at(&self, t: usize) -> Result<Vec<f64>> {
        Ok(self.map.embed(&self.z.params_at(t)?))
    }

    pub fn final_theta(&self) -> Vec<f64> {
        self.map.embed(&self.z.final_params)
    }
}

/// Minimizes `L(θ₀ + P z)` over z starting from z = 0, with ∂L/∂z = Pᵀ∇L.
pub fn train_subspace(target: &dyn TrainTarget, map: SubspaceMap, config: &OptimizerConfig) -> Result<SubspaceRun> {
    if map.offset.len() != target.dim() {
        return Err(Error::Dimension { what: "subspace offset", expected: target.dim(), got: map.offset.len() });
    }
    let z0 = vec![0.0; map.dim()];
    let z = train(&SubspaceTarget { inner: target, map: &map }, &z0, config)?;
    Ok(SubspaceRun { map, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, NetworkSpec};
    use crate::problems::{Objective, ObjectiveKind};
    use crate::rng;

    #[test]
    fn random_columns_are_unit() {
        let mut r = rng::stream(1, "projection");
        let map = SubspaceMap::random(vec![0.0; 40], 6, &mut r, false).unwrap();
        for k in 0..6 {
            assert!((norm(map.columns.row(k)) - 1.0).abs() < 1e-14);
        }
        assert!(SubspaceMap::random(vec![0.0; 4], 5, &mut r, false).is_err());
        let ortho = SubspaceMap::random(vec![0.0; 40], 6, &mut r, true).unwrap();
        assert!(dot(ortho.columns.row(0), ortho.columns.row(5)).abs() < 1e-14);
    }

    #[test]
    fn identity_embedding_reproduces_unconstrained_training() {
        let obj = Objective::new(ObjectiveKind::Pinn1d, NetworkSpec::elliptic_1d(5)).unwrap();
        let init = init_params(&obj.spec, 3, 1.0);
        let cfg = OptimizerConfig::adam(1e-3, 40);
        let full = train(&obj, &init, &cfg).unwrap();
        let sub = train_subspace(&obj, SubspaceMap::identity(init.clone()), &cfg).unwrap();
        for (a, b) in full.losses.iter().zip(&sub.z.losses) {
            assert!((a - b).abs() <= 1e-10 * a.abs());
        }
    }

    #[test]
    fn subspace_trajectory_stays_in_range() {
        let obj = Objective::new(ObjectiveKind::Drm1d, NetworkSpec::elliptic_1d(5)).unwrap();
        let init = init_params(&obj.spec, 3, 1.0);
        let mut r = rng::stream(2, "projection");
        let map = SubspaceMap::random(init, 4, &mut r, false).unwrap();
        let run = train_subspace(&obj, map, &OptimizerConfig::adam(1e-2, 30)).unwrap();
        assert_eq!(run.theta_at(0).unwrap(), run.map.offset);
        let residual = run.map.range_residual(&run.final_theta()).unwrap();
        assert!(residual < 1e-10 * norm(&run.map.offset));
        assert!(run.z.final_loss() < run.z.losses[0]);
    }
}
