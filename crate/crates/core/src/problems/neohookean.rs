//! Compressible Neohookean elasticity on the unit disk.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self { lambda1: 1.0, lambda2: 0.25 }
    }
}

/// Displacement with its first and second derivatives at one point:
/// `du[i][j] = ∂u_i/∂X_j`, `d2u[i][j][k] = ∂²u_i/∂X_j∂X_k`.
#[derive(Clone, Copy, Debug)]
pub struct FieldDerivatives<S> {
    pub u: [S; 2],
    pub du: [[S; 2]; 2],
    pub d2u: [[[S; 2]; 2]; 2],
}

impl FieldDerivatives<f64> {
    pub fn from_jets(jets: &[Jet<f64>; 2]) -> Self {
        Self {
            u: [jets[0].value, jets[1].value],
            du: [jets[0].d1, jets[1].d1],
            d2u: [jets[0].d2, jets[1].d2],
        }
    }
}

/// F, J and P at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeohookeanState {
    pub f: [[f64; 2]; 2],
    pub j: f64,
    pub p: [[f64; 2]; 2],
}

impl NeohookeanState {
    pub fn from_gradient(material: &Material, du: &[[f64; 2]; 2]) -> Self {
        let f = deformation_gradient(du);
        let j = determinant(&f);
        Self { f, j, p: first_piola(material, &f) }
    }
}

pub fn deformation_gradient<S: Scalar>(du: &[[S; 2]; 2]) -> [[S; 2]; 2] {
    [[du[0][0] + 1.0, du[0][1]], [du[1][0], du[1][1] + 1.0]]
}

pub fn determinant<S: Scalar>(f: &[[S; 2]; 2]) -> S {
    f[0][0] * f[1][1] - f[0][1] * f[1][0]
}

/// F⁻ᵀ.
fn inverse_transpose<S: Scalar>(f: &[[S; 2]; 2], j: S) -> [[S; 2]; 2] {
    [[f[1][1] / j, -f[1][0] / j], [-f[0][1] / j, f[0][0] / j]]
}

/// `ln max(J, c)` and whether the clamp is active. The clamped branch is a
/// constant, so its derivative is zero.
fn clamped_log<S: Scalar>(j: S, clamp: Option<f64>) -> (S, bool) {
    match clamp {
        Some(c) if j.primal() < c => (j.constant_like(c.ln()), true),
        _ => (j.ln(), false),
    }
}

/// `P = ℓ₁(F − F⁻ᵀ) + ℓ₂ ln J F⁻ᵀ`.
pub fn first_piola(material: &Material, f: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let j = determinant(f);
    let g = inverse_transpose(f, j);
    let lnj = j.ln();
    let mut p = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            p[a][b] = material.lambda1 * (f[a][b] - g[a][b]) + material.lambda2 * lnj * g[a][b];
        }
    }
    p
}

/// Strain energy density `ℓ₁/2 (F:F − 2 − 2 ln J) + ℓ₂/2 (ln J)²`.
pub fn strain_energy<S: Scalar>(material: &Material, du: &[[S; 2]; 2], clamp: Option<f64>) -> S {
    let f = deformation_gradient(du);
    let j = determinant(&f);
    let (lnj, _) = clamped_log(j, clamp);
    let ff = f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1];
    (ff - 2.0 - lnj * 2.0) * (material.lambda1 * 0.5) + lnj * lnj * (material.lambda2 * 0.5)
}

/// `∂P_ij/∂X_j` from first and second displacement derivatives, using
/// `dP = ℓ₁ dF + (ℓ₁ − ℓ₂ ln J) F⁻ᵀ dFᵀ F⁻ᵀ + ℓ₂ (F⁻ᵀ : dF) F⁻ᵀ`.
pub fn stress_divergence<S: Scalar>(material: &Material, du: &[[S; 2]; 2], d2u: &[[[S; 2]; 2]; 2], clamp: Option<f64>) -> [S; 2] {
    let (l1, l2) = (material.lambda1, material.lambda2);
    let f = deformation_gradient(du);
    let j = determinant(&f);
    let g = inverse_transpose(&f, j);
    let (lnj, clamped) = clamped_log(j, clamp);
    let coeff = -(lnj * l2) + l1;
    let zero = j.constant_like(0.0);
    let mut div = [zero, zero];
    for x in 0..2 {
        // dF_kl = ∂F_kl/∂X_x
        let df = [[d2u[0][0][x], d2u[0][1][x]], [d2u[1][0][x], d2u[1][1][x]]];
        // (G dFᵀ)_ac = Σ_d G_ad dF_cd
        let mut gdft = [[zero, zero], [zero, zero]];
        for a in 0..2 {
            for c in 0..2 {
                gdft[a][c] = g[a][0] * df[c][0] + g[a][1] * df[c][1];
            }
        }
        for i in 0..2 {
            // (G dFᵀ G)_ix
            let mixed = gdft[i][0] * g[0][x] + gdft[i][1] * g[1][x];
            div[i] = div[i] + df[i][x] * l1 + coeff * mixed;
            if !clamped {
                let contraction = g[0][0] * df[0][0] + g[0][1] * df[0][1] + g[1][0] * df[1][0] + g[1][1] * df[1][1];
                div[i] = div[i] + contraction * g[i][x] * l2;
            }
        }
    }
    div
}

/// Torsional field `α r²(1 − r²)(−X₂, X₁)`.
pub fn manufactured_2d<S: Scalar>(x: &[S], alpha: f64) -> [S; 2] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let s = r2 * (-r2 + 1.0) * alpha;
    [-(s * x[1]), s * x[0]]
}

/// Manufactured displacement and its derivatives at `point`.
pub fn manufactured_derivatives(point: &[f64], alpha: f64) -> FieldDerivatives<f64> {
    let xs = Jet::<f64>::coordinates(&point[..2]);
    FieldDerivatives::from_jets(&manufactured_2d(&xs, alpha))
}

/// `B = −∇·P` for the manufactured field.
pub fn body_force_2d(point: &[f64], material: &Material, alpha: f64) -> [f64; 2] {
    let m = manufactured_derivatives(point, alpha);
    let div = stress_divergence(material, &m.du, &m.d2u, None);
    [-div[0], -div[1]]
}

/// Total potential energy density `W(F) − B·u`.
pub fn drm_density<S: Scalar>(material: &Material, field: &FieldDerivatives<S>, body: [f64; 2], clamp: Option<f64>) -> S {
    strain_energy(material, &field.du, clamp) - field.u[0] * body[0] - field.u[1] * body[1]
}

/// `½ |∇·P + B|²`.
pub fn pinn_density<S: Scalar>(material: &Material, field: &FieldDerivatives<S>, body: [f64; 2], clamp: Option<f64>) -> S {
    let div = stress_divergence(material, &field.du, &field.d2u, clamp);
    let r0 = div[0] + body[0];
    let r1 = div[1] + body[1];
    (r0 * r0 + r1 * r1) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng;

    const MAT: Material = Material { lambda1: 1.0, lambda2: 0.25 };

    #[test]
    fn manufactured_examples() {
        assert_eq!(manufactured_2d(&[1.0, 0.0], 3.0), [0.0, 0.0]);
        assert_eq!(manufactured_2d(&[0.0, 0.0], 1.0), [0.0, 0.0]);
        let u = manufactured_2d(&[0.5, 0.0], 1.0);
        assert!(u[0].abs() < 1e-16 && (u[1] - 0.09375).abs() < 1e-15);
    }

    #[test]
    fn rest_state() {
        let s = NeohookeanState::from_gradient(&MAT, &[[0.0; 2]; 2]);
        assert_eq!(s.j, 1.0);
        assert_eq!(s.p, [[0.0; 2]; 2]);
        assert_eq!(strain_energy(&MAT, &[[0.0_f64; 2]; 2], None), 0.0);
    }

    /// Independent oracle: F by central differences of the closed-form field,
    /// P from F, divergence by central differences of P.
    fn fd_body_force(x: [f64; 2]) -> [f64; 2] {
        let h = 1e-4;
        let piola_at = |y: [f64; 2]| {
            let mut du = [[0.0; 2]; 2];
            for j in 0..2 {
                let mut yp = y;
                let mut ym = y;
                yp[j] += h;
                ym[j] -= h;
                let (up, um) = (manufactured_2d(&yp, 1.0), manufactured_2d(&ym, 1.0));
                for i in 0..2 {
                    du[i][j] = (up[i] - um[i]) / (2.0 * h);
                }
            }
            first_piola(&MAT, &deformation_gradient(&du))
        };
        let mut b = [0.0; 2];
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (pp, pm) = (piola_at(xp), piola_at(xm));
            for i in 0..2 {
                b[i] -= (pp[i][j] - pm[i][j]) / (2.0 * h);
            }
        }
        b
    }

    #[test]
    fn body_force_matches_finite_difference_oracle() {
        let mut r = rng::stream(3, "points");
        for _ in 0..20 {
            let x = [r.random_range(-0.65..0.65), r.random_range(-0.65..0.65)];
            let b = body_force_2d(&x, &MAT, 1.0);
            let oracle = fd_body_force(x);
            for i in 0..2 {
                assert!((b[i] - oracle[i]).abs() < 1e-5, "{b:?} vs {oracle:?}");
            }
        }
        let b0 = body_force_2d(&[0.0, 0.0], &MAT, 1.0);
        assert!(b0[0].abs() < 1e-15 && b0[1].abs() < 1e-15);
    }

    #[test]
    fn residual_vanishes_for_manufactured_field() {
        let mut r = rng::stream(4, "points");
        for _ in 0..20 {
            let rad = r.random_range(0.0..0.99_f64).sqrt();
            let t = r.random_range(0.0..std::f64::consts::TAU);
            let x = [rad * t.cos(), rad * t.sin()];
            let field = manufactured_derivatives(&x, 1.0);
            let body = body_force_2d(&x, &MAT, 1.0);
            let div = stress_divergence(&MAT, &field.du, &field.d2u, None);
            assert!((div[0] + body[0]).abs() < 1e-8 && (div[1] + body[1]).abs() < 1e-8);
            assert!(pinn_density(&MAT, &field, body, None) < 1e-16);
        }
    }

    #[test]
    fn body_force_is_rotation_equivariant() {
        let mut r = rng::stream(5, "rotations");
        for _ in 0..20 {
            let phi = r.random_range(0.0..std::f64::consts::TAU);
            let (c, s) = (phi.cos(), phi.sin());
            let x = [r.random_range(-0.6..0.6), r.random_range(-0.6..0.6)];
            let rx = [c * x[0] - s * x[1], s * x[0] + c * x[1]];
            let b = body_force_2d(&x, &MAT, 1.0);
            let rb = [c * b[0] - s * b[1], s * b[0] + c * b[1]];
            let b_rx = body_force_2d(&rx, &MAT, 1.0);
            assert!((rb[0] - b_rx[0]).abs() < 1e-12 && (rb[1] - b_rx[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn inverted_material_is_non_finite_unless_clamped() {
        let du = [[-1.5, 0.0], [0.0, 0.0]]; // J = −0.5
        assert!(!strain_energy(&MAT, &du, None).is_finite());
        assert!(strain_energy(&MAT, &du, Some(1e-6)).is_finite());
    }

    #[test]
    fn clamped_log_has_zero_slope() {
        let tape = crate::autodiff::Tape::<f64>::new();
        let j = tape.var(1e-9);
        let (l, clamped) = clamped_log(j, Some(1e-6));
        assert!(clamped);
        assert_eq!(tape.gradient(&l, &[j])[0], 0.0);
    }
}
