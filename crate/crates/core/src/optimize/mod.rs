//! ADAM and plain gradient descent, with hypersphere-constrained and
//! random-subspace variants. Every run records its full trajectory.

mod subspace;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use subspace::{train_subspace, SubspaceMap, SubspaceRun};
pub use trajectory::{SnapshotStore, TrajectoryRecord, DEFAULT_SPILL_BYTES};

use crate::autodiff::{Differentiable, Quadratic};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::problems::{Integration, Objective};
use crate::rng::{self, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Gd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seed of the Monte Carlo sampling stream.
    pub seed: u64,
    /// Keep every θ_t (otherwise only the endpoints and the loss series).
    pub keep_snapshots: bool,
    pub spill_bytes: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            epochs: 7500,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            keep_snapshots: true,
            spill_bytes: DEFAULT_SPILL_BYTES,
        }
    }
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64, epochs: usize) -> Self {
        Self { learning_rate, epochs, ..Self::default() }
    }

    pub fn gd(learning_rate: f64, epochs: usize) -> Self {
        Self { kind: OptimizerKind::Gd, learning_rate, epochs, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::Config("ADAM moments need 0 ≤ β < 1 and ε > 0".into()));
        }
        Ok(())
    }
}

/// Optimizer state for one run.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Gd { learning_rate: f64 },
    Adam { learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64, t: i32, m: Vec<f64>, v: Vec<f64> },
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig, dim: usize) -> Self {
        match config.kind {
            OptimizerKind::Gd => Optimizer::Gd { learning_rate: config.learning_rate },
            OptimizerKind::Adam => Optimizer::Adam {
                learning_rate: config.learning_rate,
                beta1: config.beta1,
                beta2: config.beta2,
                epsilon: config.epsilon,
                t: 0,
                m: vec![0.0; dim],
                v: vec![0.0; dim],
            },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Gd { learning_rate } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *learning_rate * g;
                }
            }
            Optimizer::Adam { learning_rate, beta1, beta2, epsilon, t, m, v } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for i in 0..params.len() {
                    let g = grad[i];
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] -= *learning_rate * m_hat / (v_hat.sqrt() + *epsilon);
                }
            }
        }
    }
}

/// What a training loop needs from a loss: a (possibly sampled) gradient per
/// step and the loss value recorded for θ_t.
pub trait TrainTarget: Sync {
    fn dim(&self) -> usize;

    /// Loss and gradient for one optimizer step.
    fn step_value_and_grad(&self, params: &[f64], rng: &mut StreamRng) -> Result<(f64, Vec<f64>)>;

    /// Loss reported in the trajectory, given the loss the step just saw.
    fn recorded_loss(&self, params: &[f64], step_loss: f64) -> Result<f64>;

    fn loss(&self, params: &[f64]) -> Result<f64>;
}

impl TrainTarget for Objective {
    fn dim(&self) -> usize {
        self.param_count()
    }

    fn step_value_and_grad(&self, params: &[f64], rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        let q = self.step_quadrature(rng);
        self.value_and_grad_on(&q, params)
    }

    fn recorded_loss(&self, params: &[f64], step_loss: f64) -> Result<f64> {
        match self.integration {
            Integration::FixedGrid => Ok(step_loss),
            Integration::MonteCarlo { .. } => self.evaluate(params),
        }
    }

    fn loss(&self, params: &[f64]) -> Result<f64> {
        self.evaluate(params)
    }
}

impl TrainTarget for Quadratic {
    fn dim(&self) -> usize {
        Differentiable::dim(self)
    }

    fn step_value_and_grad(&self, params: &[f64], _rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        self.value_and_grad(params)
    }

    fn recorded_loss(&self, _params: &[f64], step_loss: f64) -> Result<f64> {
        Ok(step_loss)
    }

    fn loss(&self, params: &[f64]) -> Result<f64> {
        self.value(params)
    }
}

/// Full-batch training from `init`.
pub fn train(target: &dyn TrainTarget, init: &[f64], config: &OptimizerConfig) -> Result<TrajectoryRecord> {
    train_projected(target, init, config, |_| {})
}

/// Training where every step is followed by a rescale to ‖θ‖ = R. The
/// initial vector is rescaled onto the sphere first.
pub fn train_on_sphere(target: &dyn TrainTarget, init: &[f64], config: &OptimizerConfig, radius: f64) -> Result<TrajectoryRecord> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
    }
    let start = project_to_sphere(init, radius)?;
    train_projected(target, &start, config, |theta| {
        let n = norm(theta);
        if n > 0.0 {
            theta.iter_mut().for_each(|v| *v *= radius / n);
        }
    })
}

fn project_to_sphere(theta: &[f64], radius: f64) -> Result<Vec<f64>> {
    let n = norm(theta);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Contract("cannot project the zero vector onto a sphere".into()));
    }
    Ok(theta.iter().map(|v| v * radius / n).collect())
}

fn train_projected(target: &dyn TrainTarget, init: &[f64], config: &OptimizerConfig, project: impl Fn(&mut [f64])) -> Result<TrajectoryRecord> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::Dimension { what: "initial parameters", expected: dim, got: init.len() });
    }
    let mut rng = rng::stream(config.seed, "monte_carlo");
    let mut optimizer = Optimizer::new(config, dim);
    let mut theta = init.to_vec();
    let mut snapshots = SnapshotStore::new(dim, config.spill_bytes);
    let mut losses = Vec::with_capacity(config.epochs + 1);
    let mut radii = Vec::with_capacity(config.epochs + 1);

    let abort = |epoch: usize, last: &[f64], source: Error| Error::TrainingAborted { epoch, last_finite: last.to_vec(), source: Box::new(source) };

    for epoch in 0..=config.epochs {
        let last = epoch == config.epochs;
        let (loss, grad) = if last {
            (target.loss(&theta), None)
        } else {
            match target.step_value_and_grad(&theta, &mut rng) {
                Ok((l, g)) => (target.recorded_loss(&theta, l), Some(g)),
                Err(e) => (Err(e), None),
            }
        };
        let loss = match loss {
            Ok(l) if l.is_finite() => l,
            Ok(_) => return Err(abort(epoch, &theta, Error::NonFinite { point: None, coords: None })),
            Err(e) => return Err(abort(epoch, &theta, e)),
        };
        if config.keep_snapshots || epoch == 0 {
            snapshots.push(&theta)?;
        }
        losses.push(loss);
        radii.push(norm(&theta));
        if let Some(grad) = grad {
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(abort(epoch, &theta, Error::NonFinite { point: None, coords: None }));
            }
            let before = theta.clone();
            optimizer.step(&mut theta, &grad);
            project(&mut theta);
            if theta.iter().any(|v| !v.is_finite()) {
                return Err(abort(epoch + 1, &before, Error::NonFinite { point: None, coords: None }));
            }
        }
    }
    Ok(TrajectoryRecord { snapshots, losses, radii, final_params: theta, initial_params: init.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::network::{init_params, NetworkSpec};
    use crate::problems::ObjectiveKind;

    #[test]
    fn gd_on_isotropic_quadratic_is_geometric() {
        let q = Quadratic::new(Matrix::identity(3));
        let init = [1.0, 1.0, 1.0];
        let run = train(&q, &init, &OptimizerConfig::gd(0.1, 20)).unwrap();
        for t in 0..=20 {
            let theta = run.params_at(t).unwrap();
            for v in theta {
                assert!((v - 0.9f64.powi(t as i32)).abs() < 1e-14);
            }
        }
        assert_eq!(run.losses.len(), 21);
        assert!(run.losses.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn adam_first_step_is_sign_of_gradient() {
        let mut q = Quadratic::new(Matrix::zeros(3, 3));
        q.b = vec![2.0, -300.0, 0.5];
        let run = train(&q, &[0.0; 3], &OptimizerConfig::adam(0.01, 1)).unwrap();
        let step = run.params_at(1).unwrap();
        for (s, g) in step.iter().zip(&q.b) {
            assert!((s + 0.01 * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn sphere_runs_stay_on_sphere() {
        let obj = Objective::new(ObjectiveKind::Pinn1d, NetworkSpec::elliptic_1d(5)).unwrap();
        let init = init_params(&obj.spec, 1, 1.0);
        let run = train_on_sphere(&obj, &init, &OptimizerConfig::adam(1e-2, 30), 3.0).unwrap();
        assert!(run.radii.iter().all(|r| (r - 3.0).abs() < 1e-12 * 3.0));
        assert!(train_on_sphere(&obj, &init, &OptimizerConfig::adam(1e-2, 3), 0.0).is_err());
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let obj = Objective::new(ObjectiveKind::Drm1d, NetworkSpec::elliptic_1d(5))
            .unwrap()
            .with_integration(Integration::MonteCarlo { batch: 50 })
            .unwrap();
        let init = init_params(&obj.spec, 2, 1.0);
        let cfg = OptimizerConfig { seed: 4, ..OptimizerConfig::adam(1e-3, 25) };
        let a = train(&obj, &init, &cfg).unwrap();
        let b = train(&obj, &init, &cfg).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn aborts_on_non_finite_loss() {
        let obj = Objective::new(ObjectiveKind::Drm2d, NetworkSpec::neohookean_2d(4)).unwrap();
        let mut init = init_params(&obj.spec, 1, 1.0);
        for v in &mut init[obj.spec.layout().outer()] {
            *v *= 500.0;
        }
        match train(&obj, &init, &OptimizerConfig::adam(1e-3, 5)) {
            Err(Error::TrainingAborted { epoch, last_finite, source }) => {
                assert_eq!(epoch, 0);
                assert_eq!(last_finite, init);
                assert!(source.is_non_finite());
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::gd(0.0, 3).validate().is_err());
        assert!(OptimizerConfig::gd(0.1, 0).validate().is_err());
        let parsed: OptimizerConfig = serde_json::from_str(r#"{"kind":"gd","learning_rate":0.5}"#).unwrap();
        assert_eq!(parsed.kind, OptimizerKind::Gd);
        assert_eq!(parsed.beta2, 0.999);
    }
}
