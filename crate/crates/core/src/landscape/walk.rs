use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Differentiable};
use crate::error::Result;
use crate::linalg::{axpy, distance, dot, normalized};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkOptions {
    pub steps: usize,
    pub step_size: f64,
    /// Remove the gradient's component from the chosen direction within the
    /// near-null eigenspace, so each step is tangent to the loss level set.
    pub tangent: bool,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self { steps: 500, step_size: 1.0, tangent: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianWalk {
    /// ‖θ_t − θ_f‖ for t = 0..=steps_completed.
    pub distance: Vec<f64>,
    /// Π(θ_t) − Π(θ_f).
    pub loss_change: Vec<f64>,
    pub eigenvalue: Vec<f64>,
    /// Size of the near-null eigenspace the direction was chosen from.
    pub cluster_size: Vec<usize>,
    pub steps_completed: usize,
    /// Set when the walk stopped early.
    pub failure: Option<String>,
    #[serde(skip)]
    pub final_params: Vec<f64>,
}

impl HessianWalk {
    pub fn max_abs_loss_change(&self) -> f64 {
        self.loss_change.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn final_distance(&self) -> f64 {
        *self.distance.last().unwrap_or(&0.0)
    }
}

/// Repeated steps of length η along the Hessian eigenvector of smallest |λ|.
///
/// Eigenvalues within `n·ε·λ_max(θ_f)` of zero are numerically
/// indistinguishable, so the smallest-|λ| eigenvector is only defined up to
/// that eigenspace. Within it the walk takes the direction closest to its
/// previous step (the first step starts from the solver's eigenvector and
/// makes its largest component positive), optionally made orthogonal to the
/// gradient.
pub fn hessian_walk(f: &dyn Differentiable, theta_f: &[f64], options: &WalkOptions) -> Result<HessianWalk> {
    let loss0 = f.value(theta_f)?;
    let n = theta_f.len();
    let mut theta = theta_f.to_vec();
    let mut walk = HessianWalk {
        distance: vec![0.0],
        loss_change: vec![0.0],
        eigenvalue: Vec::new(),
        cluster_size: Vec::new(),
        steps_completed: 0,
        failure: None,
        final_params: theta.clone(),
    };
    let mut previous: Option<Vec<f64>> = None;
    let mut tolerance: Option<f64> = None;

    for _ in 0..options.steps {
        let step = (|| -> Result<(Vec<f64>, f64, usize)> {
            let h = autodiff::hessian(f, &theta)?;
            let eig = h.eigen()?;
            let lmax = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let tol = *tolerance.get_or_insert(n as f64 * f64::EPSILON * lmax);
            let kmin = (0..n).min_by(|&a, &b| eig.values[a].abs().total_cmp(&eig.values[b].abs())).expect("nonempty spectrum");
            let lambda = eig.values[kmin];
            let bound = tol.max(lambda.abs());
            let cluster: Vec<Vec<f64>> = (0..n).filter(|&k| eig.values[k].abs() <= bound).map(|k| eig.vector(k)).collect();

            let seed = previous.clone().unwrap_or_else(|| eig.vector(kmin));
            let mut coords: Vec<f64> = cluster.iter().map(|u| dot(u, &seed)).collect();
            if options.tangent {
                let grad = f.gradient(&theta)?;
                let gc: Vec<f64> = cluster.iter().map(|u| dot(u, &grad)).collect();
                let gg = dot(&gc, &gc);
                if gg > 0.0 && cluster.len() > 1 {
                    let c = dot(&coords, &gc) / gg;
                    axpy(-c, &gc, &mut coords);
                }
            }
            let mut v = vec![0.0; n];
            for (u, &c) in cluster.iter().zip(&coords) {
                axpy(c, u, &mut v);
            }
            let mut v = normalized(&v).unwrap_or_else(|| eig.vector(kmin));
            let flip = match &previous {
                Some(p) => dot(p, &v) < 0.0,
                None => {
                    let big = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
                    big < 0.0
                }
            };
            if flip {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            Ok((v, lambda, cluster.len()))
        })();
        let (v, lambda, size) = match step {
            Ok(s) => s,
            Err(e) => {
                walk.failure = Some(e.to_string());
                break;
            }
        };
        axpy(options.step_size, &v, &mut theta);
        let loss = match f.value(&theta) {
            Ok(l) => l,
            Err(e) => {
                walk.failure = Some(e.to_string());
                break;
            }
        };
        walk.distance.push(distance(&theta, theta_f));
        walk.loss_change.push(loss - loss0);
        walk.eigenvalue.push(lambda);
        walk.cluster_size.push(size);
        walk.steps_completed += 1;
        walk.final_params = theta.clone();
        previous = Some(v);
    }
    Ok(walk)
}
