use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Integration points with their weights. Points always carry two coordinates;
/// one-dimensional grids leave the second at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub dim: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Midpoint rule on [0, 1]: `x_i = (i − ½)/n`, weight `1/n`.
    pub fn midpoint_1d(n: usize) -> Self {
        let h = 1.0 / n as f64;
        Self {
            dim: 1,
            points: (0..n).map(|i| [(i as f64 + 0.5) * h, 0.0]).collect(),
            weights: vec![h; n],
        }
    }

    /// Cell-centred polar grid on the unit disk with the `r dr dθ` Jacobian.
    pub fn polar_disk(radial: usize, angular: usize) -> Self {
        let dr = 1.0 / radial as f64;
        let dt = 2.0 * PI / angular as f64;
        let mut points = Vec::with_capacity(radial * angular);
        let mut weights = Vec::with_capacity(radial * angular);
        for i in 0..radial {
            let r = (i as f64 + 0.5) * dr;
            for j in 0..angular {
                let t = (j as f64 + 0.5) * dt;
                points.push([r * t.cos(), r * t.sin()]);
                weights.push(r * dr * dt);
            }
        }
        Self { dim: 2, points, weights }
    }

    /// `n` i.i.d. uniform points on [0, 1], each weighted `1/n`.
    pub fn monte_carlo_1d(n: usize, rng: &mut impl Rng) -> Self {
        Self {
            dim: 1,
            points: (0..n).map(|_| [rng.random::<f64>(), 0.0]).collect(),
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// `n` i.i.d. area-uniform points on the unit disk, each weighted `π/n`.
    pub fn monte_carlo_disk(n: usize, rng: &mut impl Rng) -> Self {
        let points = (0..n)
            .map(|_| {
                let r = rng.random::<f64>().sqrt();
                let t = 2.0 * PI * rng.random::<f64>();
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        Self { dim: 2, points, weights: vec![PI / n as f64; n] }
    }

    /// Evenly spaced test points on [0, 1] including both ends.
    pub fn uniform_1d_inclusive(n: usize) -> Vec<[f64; 2]> {
        (0..n).map(|i| [i as f64 / (n - 1) as f64, 0.0]).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        self.points[p][..self.dim].to_vec()
    }
}

/// Deterministic scattered test points in the closed unit disk (a sunflower
/// spiral), used for pointwise error reports.
pub fn disk_test_cloud(n: usize) -> Vec<[f64; 2]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let r = ((k as f64 + 0.5) / n as f64).sqrt();
            let t = k as f64 * golden;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn reference_grids() {
        let g = QuadratureGrid::midpoint_1d(100);
        assert_eq!(g.len(), 100);
        assert!((g.total_weight() - 1.0).abs() < 1e-14);
        assert!((g.points[0][0] - 0.005).abs() < 1e-15);

        let d = QuadratureGrid::polar_disk(20, 50);
        assert_eq!(d.len(), 1000);
        assert!((d.total_weight() - PI).abs() < 1e-12);
        assert!(d.points.iter().all(|p| p[0].hypot(p[1]) < 1.0));
    }

    #[test]
    fn midpoint_integrates_smooth_functions() {
        let g = QuadratureGrid::midpoint_1d(100);
        let v: Vec<f64> = g.points.iter().map(|p| (PI * p[0]).sin()).collect();
        assert!((g.integrate(&v) - 2.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn monte_carlo_grids_stay_in_domain() {
        let mut r = rng::stream(1, "mc");
        let g = QuadratureGrid::monte_carlo_disk(500, &mut r);
        assert!(g.points.iter().all(|p| p[0].hypot(p[1]) <= 1.0));
        assert!((g.total_weight() - PI).abs() < 1e-12);
        let g = QuadratureGrid::monte_carlo_1d(100, &mut r);
        assert!(g.points.iter().all(|p| (0.0..1.0).contains(&p[0])));
        assert_eq!(disk_test_cloud(500).len(), 500);
    }
}
