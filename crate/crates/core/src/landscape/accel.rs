use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::optimize::TrajectoryRecord;

#[derive(Clone, Debug, Serialize)]
pub struct AccelerationSeries {
    /// Interior epochs 1 … T−1.
    pub epochs: Vec<usize>,
    /// ‖θ_{t+1} − 2θ_t + θ_{t−1}‖ / η².
    pub magnitude: Vec<f64>,
    /// magnitude / ‖θ̇_t‖², NaN where the velocity vanishes.
    pub normalized: Option<Vec<f64>>,
}

impl AccelerationSeries {
    /// Entries of `normalized` that are defined.
    pub fn mask(&self) -> Option<Vec<bool>> {
        self.normalized.as_ref().map(|v| v.iter().map(|x| x.is_finite()).collect())
    }
}

pub fn acceleration_series(trajectory: &TrajectoryRecord, eta: f64, normalize: bool) -> Result<AccelerationSeries> {
    if trajectory.epochs() < 2 || !trajectory.has_snapshots() {
        return Err(Error::Contract("acceleration needs at least three recorded snapshots".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Config("acceleration needs a positive step size".into()));
    }
    let mut window: Vec<Vec<f64>> = Vec::with_capacity(3);
    let mut series = AccelerationSeries { epochs: Vec::new(), magnitude: Vec::new(), normalized: normalize.then(Vec::new) };
    trajectory.snapshots.for_each(|t, theta| {
        if window.len() == 3 {
            window.remove(0);
        }
        window.push(theta.to_vec());
        if window.len() < 3 {
            return;
        }
        let (prev, cur, next) = (&window[0], &window[1], &window[2]);
        let accel: Vec<f64> = (0..cur.len()).map(|i| (next[i] - 2.0 * cur[i] + prev[i]) / (eta * eta)).collect();
        let a = norm(&accel);
        series.epochs.push(t - 1);
        series.magnitude.push(a);
        if let Some(out) = series.normalized.as_mut() {
            let v: Vec<f64> = (0..cur.len()).map(|i| (next[i] - cur[i]) / eta).collect();
            let v2 = norm(&v).powi(2);
            out.push(if v2 > 0.0 { a / v2 } else { f64::NAN });
        }
    })?;
    Ok(series)
}

/// First epoch whose loss is within `fraction` of the total decrease from
/// the final loss.
pub fn convergence_epoch(losses: &[f64], fraction: f64) -> usize {
    let (first, last) = (losses[0], *losses.last().unwrap());
    let band = fraction * (first - last).abs();
    losses.iter().position(|&l| (l - last).abs() <= band).unwrap_or(losses.len() - 1)
}

/// Median of the raw magnitude over the first 10% of epochs and over the
/// 10% of epochs just before convergence.
pub fn early_and_late_medians(series: &AccelerationSeries, total_epochs: usize, converged_at: usize) -> (f64, f64) {
    let span = (total_epochs / 10).max(1);
    let pick = |lo: usize, hi: usize| {
        let mut v: Vec<f64> = series.epochs.iter().zip(&series.magnitude).filter(|(&t, _)| t >= lo && t < hi).map(|(_, &a)| a).collect();
        median(&mut v)
    };
    let late_end = converged_at.max(span + 1);
    (pick(1, span + 1), pick(late_end.saturating_sub(span), late_end))
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Quadratic;
    use crate::linalg::Matrix;
    use crate::optimize::{train, OptimizerConfig, SnapshotStore};

    fn record(rows: Vec<Vec<f64>>) -> TrajectoryRecord {
        let q = Quadratic::new(Matrix::identity(rows[0].len()));
        let mut cfg = OptimizerConfig::gd(0.1, rows.len() - 1);
        cfg.keep_snapshots = true;
        let mut run = train(&q, &rows[0], &cfg).unwrap();
        run.snapshots = SnapshotStore::new(rows[0].len(), 1 << 20);
        rows.iter().for_each(|r| run.snapshots.push(r).unwrap());
        run
    }

    #[test]
    fn linear_motion_has_no_acceleration() {
        let run = record((0..10).map(|t| vec![t as f64, -2.0 * t as f64]).collect());
        let s = acceleration_series(&run, 0.5, true).unwrap();
        assert_eq!(s.epochs, (1..9).collect::<Vec<_>>());
        assert!(s.magnitude.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn quadratic_motion_has_constant_acceleration() {
        let d = [3.0, 4.0];
        let run = record((0..8).map(|t| d.iter().map(|x| (t * t) as f64 * x).collect()).collect());
        let s = acceleration_series(&run, 1.0, false).unwrap();
        assert!(s.magnitude.iter().all(|&a| (a - 10.0).abs() < 1e-12));
        assert!(s.normalized.is_none());
    }

    #[test]
    fn stalled_steps_are_masked() {
        let run = record(vec![vec![0.0], vec![1.0], vec![1.0], vec![1.0]]);
        let s = acceleration_series(&run, 1.0, true).unwrap();
        assert_eq!(s.mask().unwrap(), vec![false, false]);
        assert_eq!(convergence_epoch(&[10.0, 5.0, 1.05, 1.0], 0.001), 3);
        assert_eq!(convergence_epoch(&[10.0, 5.0, 1.05, 1.0], 0.01), 2);
    }
}
