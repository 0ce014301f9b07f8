use serde::Serialize;

use crate::autodiff::Differentiable;
use crate::error::{Error, Result};

/// Default relative tolerance for the monotonicity verdict.
pub const MLI_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct MliScan {
    pub t: Vec<f64>,
    /// NaN where the loss was non-finite.
    pub losses: Vec<f64>,
    pub finite: Vec<bool>,
    pub monotone: bool,
    /// Largest increase between consecutive samples relative to |L| at the
    /// earlier sample.
    pub max_relative_bump: f64,
}

/// Loss along `θᵢ + t(θ_f − θᵢ)` at `samples` uniform t in [0, 1].
///
/// The scan is monotone when every sample is finite and no consecutive
/// increase exceeds `tolerance · |L_k|`.
pub fn mli_scan(f: &dyn Differentiable, theta_i: &[f64], theta_f: &[f64], samples: usize, tolerance: f64) -> Result<MliScan> {
    if samples < 2 {
        return Err(Error::Config("an interpolation scan needs at least 2 samples".into()));
    }
    if theta_i.len() != theta_f.len() {
        return Err(Error::Dimension { what: "interpolation endpoints", expected: theta_i.len(), got: theta_f.len() });
    }
    let t: Vec<f64> = (0..samples).map(|k| k as f64 / (samples - 1) as f64).collect();
    let mut losses = Vec::with_capacity(samples);
    let mut finite = Vec::with_capacity(samples);
    for &tk in &t {
        let theta: Vec<f64> = theta_i.iter().zip(theta_f).map(|(a, b)| a + tk * (b - a)).collect();
        match f.value(&theta) {
            Ok(v) if v.is_finite() => {
                losses.push(v);
                finite.push(true);
            }
            Ok(_) | Err(Error::NonFinite { .. }) => {
                losses.push(f64::NAN);
                finite.push(false);
            }
            Err(e) => return Err(e),
        }
    }
    let all_finite = finite.iter().all(|&b| b);
    let max_bump = losses
        .windows(2)
        .filter(|w| w[0].is_finite() && w[1].is_finite())
        .map(|w| match w[1] - w[0] {
            rise if rise <= 0.0 => 0.0,
            _ if w[0] == 0.0 => f64::INFINITY,
            rise => rise / w[0].abs(),
        })
        .fold(0.0, f64::max);
    Ok(MliScan { t, losses, finite, monotone: all_finite && max_bump <= tolerance, max_relative_bump: max_bump })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Quadratic;
    use crate::linalg::Matrix;

    #[test]
    fn convex_quadratic_is_monotone_towards_minimizer() {
        let q = Quadratic::new(Matrix::diagonal(&[1.0, 10.0, 0.1]));
        let scan = mli_scan(&q, &[3.0, -1.0, 2.0], &[0.0; 3], 101, MLI_TOLERANCE).unwrap();
        assert!(scan.monotone);
        assert_eq!(scan.losses[0], q.value(&[3.0, -1.0, 2.0]).unwrap());
        assert_eq!(*scan.losses.last().unwrap(), 0.0);
    }

    #[test]
    fn detects_bumps() {
        let q = Quadratic::new(Matrix::identity(2));
        let scan = mli_scan(&q, &[-1.0, 0.0], &[0.5, 0.0], 11, MLI_TOLERANCE).unwrap();
        assert!(!scan.monotone);
        assert!(scan.max_relative_bump > 0.1);
        assert!(mli_scan(&q, &[0.0], &[0.0, 1.0], 5, MLI_TOLERANCE).is_err());
    }
}
