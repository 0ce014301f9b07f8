use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::Differentiable;
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::optimize::{self, OptimizerConfig, TrainTarget};
use crate::rng::StreamRng;

/// Quadratic Bezier curve `(1−t)²θ₁ + 2t(1−t)p + t²θ₂`.
#[derive(Clone, Debug)]
pub struct BezierPath {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub control: Vec<f64>,
}

impl BezierPath {
    /// Control point at the segment midpoint: the curve is then the segment
    /// `θ₁ + t(θ₂ − θ₁)` itself.
    pub fn straight(start: &[f64], end: &[f64]) -> Self {
        let control = start.iter().zip(end).map(|(a, b)| 0.5 * (a + b)).collect();
        Self { start: start.to_vec(), end: end.to_vec(), control }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let (a, b, c) = ((1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t);
        if t == 0.0 {
            return self.start.clone();
        }
        if t == 1.0 {
            return self.end.clone();
        }
        (0..self.start.len()).map(|i| a * self.start[i] + b * self.control[i] + c * self.end[i]).collect()
    }
}

fn linear_point(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

#[derive(Clone, Debug, Serialize)]
#[serde(default)]
pub struct ModeConnectOptions {
    /// Uniform t samples discretizing the path integral.
    pub t_samples: usize,
    /// Samples in the reported loss profiles.
    pub profile_samples: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for ModeConnectOptions {
    fn default() -> Self {
        Self { t_samples: 25, profile_samples: 101, optimizer: OptimizerConfig::adam(1e-3, 15000) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LossProfile {
    pub t: Vec<f64>,
    /// NaN where non-finite.
    pub losses: Vec<f64>,
}

impl LossProfile {
    fn sample(f: &dyn Differentiable, samples: usize, point: impl Fn(f64) -> Vec<f64> + Sync) -> Self {
        let t: Vec<f64> = (0..samples).map(|k| k as f64 / (samples.max(2) - 1) as f64).collect();
        let losses = t.par_iter().map(|&tk| f.value(&point(tk)).ok().filter(|v| v.is_finite()).unwrap_or(f64::NAN)).collect();
        Self { t, losses }
    }

    pub fn all_finite(&self) -> bool {
        self.losses.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.losses.iter().fold(f64::NEG_INFINITY, |m, &v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
    }

    /// max |L(t) − reference|, infinite if any sample is non-finite.
    pub fn max_deviation(&self, reference: f64) -> f64 {
        self.losses.iter().fold(0.0, |m, &v| if v.is_nan() { f64::INFINITY } else { m.max((v - reference).abs()) })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeConnection {
    pub endpoint_losses: [f64; 2],
    /// max(|L(θ₁)|, |L(θ₂)|).
    pub endpoint_scale: f64,
    /// Linear-path maximum minus the larger endpoint loss.
    pub linear_barrier: f64,
    /// max_t |L(bezier(t)) − L(θ₁)| on the profile samples.
    pub bezier_max_deviation: f64,
    /// Discretized path objective at the returned control point.
    pub path_objective: f64,
    pub initial_path_objective: f64,
    pub linear: LossProfile,
    pub bezier: LossProfile,
    /// Set when the control-point optimization aborted.
    pub failure: Option<String>,
    #[serde(skip)]
    pub control: Vec<f64>,
    /// Path objective per optimizer epoch.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// ½ mean_s (L(bezier(t_s)) − L(θ₁))² as a function of the control point.
struct PathTarget<'a> {
    f: &'a dyn Differentiable,
    start: &'a [f64],
    end: &'a [f64],
    t: Vec<f64>,
    reference: f64,
}

impl PathTarget<'_> {
    fn path(&self, control: &[f64]) -> BezierPath {
        BezierPath { start: self.start.to_vec(), end: self.end.to_vec(), control: control.to_vec() }
    }

    fn objective(&self, control: &[f64], with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let path = self.path(control);
        let s = self.t.len() as f64;
        let terms: Vec<(f64, Vec<f64>)> = self
            .t
            .par_iter()
            .map(|&t| -> Result<(f64, Vec<f64>)> {
                let theta = path.at(t);
                let weight = 2.0 * t * (1.0 - t);
                if with_grad && weight != 0.0 {
                    let (l, g) = self.f.value_and_grad(&theta)?;
                    let r = l - self.reference;
                    Ok((0.5 * r * r / s, g.into_iter().map(|gi| r * weight * gi / s).collect()))
                } else {
                    let r = self.f.value(&theta)? - self.reference;
                    Ok((0.5 * r * r / s, Vec::new()))
                }
            })
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; control.len()];
        let mut value = 0.0;
        for (v, g) in terms {
            value += v;
            if !g.is_empty() {
                axpy(1.0, &g, &mut grad);
            }
        }
        Ok((value, grad))
    }
}

impl TrainTarget for PathTarget<'_> {
    fn dim(&self) -> usize {
        self.start.len()
    }

    fn step_value_and_grad(&self, params: &[f64], _rng: &mut StreamRng) -> Result<(f64, Vec<f64>)> {
        self.objective(params, true)
    }

    fn recorded_loss(&self, _params: &[f64], step_loss: f64) -> Result<f64> {
        Ok(step_loss)
    }

    fn loss(&self, params: &[f64]) -> Result<f64> {
        Ok(self.objective(params, false)?.0)
    }
}

/// Optimizes the Bezier control point joining two solutions so the loss
/// stays at L(θ₁) along the curve, starting from the straight segment.
///
/// `profile` is the loss used for the reported linear-path profile (the 2D
/// problems pass a J-clamped objective so the segment stays plottable).
pub fn mode_connect(f: &dyn Differentiable, profile: &dyn Differentiable, theta1: &[f64], theta2: &[f64], options: &ModeConnectOptions) -> Result<ModeConnection> {
    if theta1.len() != theta2.len() || theta1.len() != f.dim() {
        return Err(Error::Dimension { what: "mode connection endpoints", expected: f.dim(), got: theta2.len() });
    }
    if options.t_samples < 2 {
        return Err(Error::Config("mode connection needs at least 2 t samples".into()));
    }
    let l1 = f.value(theta1)?;
    let l2 = f.value(theta2)?;
    let n = options.t_samples;
    let target = PathTarget { f, start: theta1, end: theta2, t: (0..n).map(|k| k as f64 / (n - 1) as f64).collect(), reference: l1 };
    let start = BezierPath::straight(theta1, theta2).control;
    let initial_path_objective = target.loss(&start)?;

    let mut config = options.optimizer.clone();
    config.keep_snapshots = true;
    let (control, history, failure) = match optimize::train(&target, &start, &config) {
        Ok(record) => {
            let best = (0..record.losses.len()).min_by(|&a, &b| record.losses[a].total_cmp(&record.losses[b])).unwrap_or(0);
            (record.params_at(best)?, record.losses, None)
        }
        Err(Error::TrainingAborted { last_finite, source, .. }) => (last_finite, Vec::new(), Some(source.to_string())),
        Err(e) => return Err(e),
    };
    let path_objective = target.loss(&control).unwrap_or(f64::NAN);

    let linear = LossProfile::sample(profile, options.profile_samples, |t| linear_point(theta1, theta2, t));
    let curve = BezierPath { start: theta1.to_vec(), end: theta2.to_vec(), control: control.clone() };
    let bezier = LossProfile::sample(f, options.profile_samples, |t| curve.at(t));
    Ok(ModeConnection {
        endpoint_losses: [l1, l2],
        endpoint_scale: l1.abs().max(l2.abs()),
        linear_barrier: linear.max() - l1.max(l2),
        bezier_max_deviation: bezier.max_deviation(l1),
        path_objective,
        initial_path_objective,
        linear,
        bezier,
        failure,
        control,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Quadratic;
    use crate::linalg::{distance, Matrix};

    #[test]
    fn midpoint_control_gives_the_segment() {
        let path = BezierPath::straight(&[0.0, 2.0], &[4.0, -2.0]);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let on_segment = linear_point(&path.start, &path.end, t);
            assert!(distance(&path.at(t), &on_segment) < 1e-14);
        }
        assert_eq!(path.at(0.0), path.start);
        assert_eq!(path.at(1.0), path.end);
    }

    #[test]
    fn equal_endpoints_have_no_barrier() {
        let q = Quadratic::new(Matrix::identity(3));
        let theta = [0.4, -0.1, 0.2];
        let options = ModeConnectOptions { optimizer: OptimizerConfig::adam(1e-3, 20), ..Default::default() };
        let m = mode_connect(&q, &q, &theta, &theta, &options).unwrap();
        assert_eq!(m.linear_barrier, 0.0);
        assert!(m.bezier_max_deviation < 1e-15);
    }

    #[test]
    fn optimizer_flattens_a_ring_valley() {
        // L = (‖θ‖² − 1)², solutions on the unit circle; the segment through
        // the inside has a barrier, a curved path can follow the ring.
        struct Ring;
        impl Differentiable for Ring {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &[f64]) -> Result<f64> {
                let r = x[0] * x[0] + x[1] * x[1] - 1.0;
                Ok(r * r)
            }
            fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
                let r = x[0] * x[0] + x[1] * x[1] - 1.0;
                Ok((r * r, vec![4.0 * r * x[0], 4.0 * r * x[1]]))
            }
            fn hvp_batch(&self, _x: &[f64], _dirs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
                unimplemented!()
            }
        }
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let options = ModeConnectOptions { optimizer: OptimizerConfig::adam(1e-2, 2000), ..Default::default() };
        let m = mode_connect(&Ring, &Ring, &a, &b, &options).unwrap();
        assert!(m.linear_barrier > 0.2);
        assert!(m.path_objective < 0.01 * m.initial_path_objective);
        assert!(m.bezier_max_deviation < 0.5 * m.linear_barrier);
    }
}
