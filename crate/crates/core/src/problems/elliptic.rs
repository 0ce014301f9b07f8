//! The one-dimensional model problem `−u'' = f` on [0, 1] with homogeneous
//! Dirichlet data.

use std::f64::consts::PI;

use crate::autodiff::Scalar;

/// Manufactured solution `u(x) = −2x sin(2πx)`.
pub fn manufactured_1d<S: Scalar>(x: S) -> S {
    x * -2.0 * (x * (2.0 * PI)).sin()
}

/// `f = −u''` for the manufactured solution.
pub fn source_1d(x: f64) -> f64 {
    8.0 * PI * (2.0 * PI * x).cos() - 8.0 * PI * PI * x * (2.0 * PI * x).sin()
}

/// Exact energy minimum `−½∫u'² dx` of the continuous problem.
pub fn exact_energy_1d() -> f64 {
    -0.5 * (1.0 + 8.0 * PI * PI / 3.0)
}

/// Energy density `½ u'² − f u`.
pub fn drm_density<S: Scalar>(u: S, du: S, f: f64) -> S {
    du * du * 0.5 - u * f
}

/// Squared residual `½ (u'' + f)²`.
pub fn pinn_density<S: Scalar>(d2u: S, f: f64) -> S {
    let r = d2u + f;
    r * r * 0.5
}
