//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit QL iterations with Wilkinson-style shifts.
//!
//! Full decompositions accumulate the orthogonal factor. When only a single
//! eigenpair is needed (the Hessian walk asks for the eigenvector of smallest
//! |λ| at every step), eigenvalues are found without accumulation and the one
//! eigenvector comes from inverse iteration on the tridiagonal matrix, mapped
//! back through the stored reflectors.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

/// Relative asymmetry above which input is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

const MAX_QL_SWEEPS: usize = 60;

#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// ‖V Λ Vᵀ − A‖_F.
    pub fn reconstruction_error(&self, a: &Matrix) -> f64 {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for k in 0..n {
                scaled[(i, k)] *= self.values[k];
            }
        }
        let rebuilt = scaled.matmul(&self.vectors.transpose());
        let diff: Vec<f64> = rebuilt.as_slice().iter().zip(a.as_slice()).map(|(x, y)| x - y).collect();
        norm(&diff)
    }
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    off: Vec<f64>,
    /// Householder vectors `v_k` acting on indices `k + 1..n`, with their β.
    reflectors: Vec<(Vec<f64>, f64)>,
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Contract(format!("eigensolver needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOLERANCE * scale || !asym.is_finite() {
        return Err(Error::Contract(format!("matrix is not symmetric (max |A - Aᵀ| = {asym:e}, max |A| = {scale:e})")));
    }
    Ok(())
}

fn tridiagonalize(a: &Matrix) -> Tridiagonal {
    let n = a.rows();
    // Work on the symmetrized copy, full storage.
    let mut w = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));

    for k in 0..n.saturating_sub(2) {
        diag[k] = w[(k, k)];
        let m = n - k - 1;
        let mut v: Vec<f64> = w.row(k)[k + 1..].to_vec();
        let xnorm = norm(&v);
        if xnorm == 0.0 {
            off[k] = 0.0;
            reflectors.push((vec![0.0; m], 0.0));
            continue;
        }
        let alpha = if v[0] > 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        let beta = 2.0 / vtv;
        off[k] = alpha;

        // p = β A22 v ; w = p − (β pᵀv / 2) v ; A22 −= v wᵀ + w vᵀ
        let mut p = vec![0.0; m];
        for i in 0..m {
            p[i] = beta * dot(&w.row(k + 1 + i)[k + 1..], &v);
        }
        let kappa = 0.5 * beta * dot(&p, &v);
        for i in 0..m {
            p[i] -= kappa * v[i];
        }
        for i in 0..m {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut w.row_mut(k + 1 + i)[k + 1..];
            for j in 0..m {
                row[j] -= vi * p[j] + pi * v[j];
            }
        }
        reflectors.push((v, beta));
    }
    if n >= 2 {
        diag[n - 2] = w[(n - 2, n - 2)];
        off[n - 2] = w[(n - 1, n - 2)];
    }
    if n >= 1 {
        diag[n - 1] = w[(n - 1, n - 1)];
    }
    Tridiagonal { diag, off, reflectors }
}

impl Tridiagonal {
    /// Qᵀ as a row-major matrix, i.e. rows are the columns of Q.
    fn q_transposed(&self, n: usize) -> Matrix {
        let mut q = Matrix::identity(n);
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let off = k + 1;
            let m = n - off;
            let mut wrow = vec![0.0; m];
            for i in 0..m {
                let vi = v[i];
                if vi != 0.0 {
                    let row = &q.row(off + i)[off..];
                    for j in 0..m {
                        wrow[j] += vi * row[j];
                    }
                }
            }
            for i in 0..m {
                let s = beta * v[i];
                let row = &mut q.row_mut(off + i)[off..];
                for j in 0..m {
                    row[j] -= s * wrow[j];
                }
            }
        }
        q.transpose()
    }

    /// Q y.
    fn apply_q(&self, y: &mut [f64]) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            let tail = &mut y[k + 1..];
            let s = beta * dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }
}

/// Implicit QL on (diag, off). When `rows` is given, the rotations are applied
/// to its rows (eigenvectors stored as rows).
fn ql_implicit(diag: &mut [f64], off: &[f64], mut rows: Option<&mut Matrix>) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let d = diag;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(Error::Numerical("QL iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = rows.as_deref_mut() {
                        let cols = z.cols();
                        let data = z.as_mut_slice();
                        let (head, tail) = data.split_at_mut((i + 1) * cols);
                        let zi = &mut head[i * cols..];
                        let zi1 = &mut tail[..cols];
                        for k in 0..cols {
                            let hk = zi1[k];
                            zi1[k] = s * zi[k] + c * hk;
                            zi[k] = c * zi[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Full spectral decomposition of a symmetric matrix, eigenvalues ascending.
pub fn eig_symmetric(a: &Matrix) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.rows();
    let tri = tridiagonalize(a);
    let mut zt = tri.q_transposed(n);
    let mut values = tri.diag.clone();
    ql_implicit(&mut values, &tri.off, Some(&mut zt))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        vectors.set_column(k, zt.row(src));
    }
    Ok(SymmetricEigen { values: sorted, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigvals_symmetric(a: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let tri = tridiagonalize(a);
    let mut values = tri.diag.clone();
    ql_implicit(&mut values, &tri.off, None)?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalue of smallest magnitude and a unit eigenvector for it.
pub fn min_abs_eigenpair(a: &Matrix) -> Result<(f64, Vec<f64>)> {
    check_symmetric(a)?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::Contract("empty matrix".into()));
    }
    let tri = tridiagonalize(a);
    let mut values = tri.diag.clone();
    ql_implicit(&mut values, &tri.off, None)?;
    let lambda = values.iter().copied().min_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap_or(0.0);
    let spread = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut y = tridiagonal_inverse_iteration(&tri.diag, &tri.off, lambda, spread);
    tri.apply_q(&mut y);
    let nrm = norm(&y);
    y.iter_mut().for_each(|v| *v /= nrm);
    Ok((lambda, y))
}

/// Inverse iteration with a slightly perturbed shift, using an LU factorization
/// with partial pivoting of the shifted tridiagonal matrix.
fn tridiagonal_inverse_iteration(diag: &[f64], off: &[f64], lambda: f64, spread: f64) -> Vec<f64> {
    let n = diag.len();
    let shift = lambda + 4.0 * f64::EPSILON * spread;
    let tiny = f64::EPSILON * spread;

    let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
    let mut dl = off.to_vec();
    let mut du = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            swapped[i] = true;
        }
    }
    for di in d.iter_mut() {
        if *di == 0.0 {
            *di = tiny;
        }
    }

    let solve = |b: &mut [f64]| {
        for i in 0..n.saturating_sub(1) {
            if swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - dl[i] * b[i];
            } else {
                b[i + 1] -= dl[i] * b[i];
            }
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    };

    // Deterministic start vector with no special alignment.
    let mut y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    for _ in 0..3 {
        solve(&mut y);
        let nrm = norm(&y);
        if !nrm.is_finite() || nrm == 0.0 {
            break;
        }
        y.iter_mut().for_each(|v| *v /= nrm);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    /// Cyclic Jacobi rotations; an independent oracle for the eigenvalues.
    fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
        let n = a.rows();
        let mut m = a.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                }
            }
        }
        let mut v: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn identity_and_diagonal() {
        let eig = eig_symmetric(&Matrix::identity(5)).unwrap();
        assert!(eig.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let eig = eig_symmetric(&Matrix::diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        for (k, axis) in [1usize, 2, 0].iter().enumerate() {
            let v = eig.vector(k);
            assert!((v[*axis].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn random_50_matches_jacobi_oracle() {
        let a = random_symmetric(50, 7);
        let eig = eig_symmetric(&a).unwrap();
        let oracle = jacobi_eigenvalues(&a);
        for (x, y) in eig.values.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        assert!(eig.reconstruction_error(&a) < 1e-8 * a.frobenius());
        let vtv = eig.vectors.transpose().matmul(&eig.vectors);
        for i in 0..50 {
            for j in 0..50 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - expect).abs() < 1e-8);
            }
        }
        let trace_err = (eig.values.iter().sum::<f64>() - a.trace()).abs();
        assert!(trace_err < 1e-8 * a.trace().abs().max(1.0));
        assert_eq!(eigvals_symmetric(&a).unwrap(), eig.values);
    }

    #[test]
    fn min_abs_pair_on_rank_deficient_matrix() {
        // B Bᵀ with B 30x20: ten exact zero eigenvalues.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Matrix::from_fn(30, 20, |_, _| rng.random_range(-1.0..1.0));
        let a = b.matmul(&b.transpose());
        let (lambda, v) = min_abs_eigenpair(&a).unwrap();
        assert!(lambda.abs() < 1e-12 * a.max_abs());
        let av = a.matvec(&v);
        assert!(norm(&av) < 1e-10 * a.max_abs());
        assert!((norm(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_abs_pair_matches_full_decomposition() {
        let a = random_symmetric(40, 11);
        let eig = eig_symmetric(&a).unwrap();
        let k = (0..40).min_by(|&i, &j| eig.values[i].abs().total_cmp(&eig.values[j].abs())).unwrap();
        let (lambda, v) = min_abs_eigenpair(&a).unwrap();
        assert!((lambda - eig.values[k]).abs() < 1e-12);
        assert!((dot(&v, &eig.vector(k)).abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut a = Matrix::identity(3);
        a[(0, 2)] = 0.5;
        assert!(matches!(eig_symmetric(&a), Err(Error::Contract(_))));
    }

    #[test]
    fn tiny_sizes() {
        let eig = eig_symmetric(&Matrix::from_rows(1, 1, vec![-2.0])).unwrap();
        assert_eq!(eig.values, vec![-2.0]);
        let eig = eig_symmetric(&Matrix::from_rows(2, 2, vec![2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14 && (eig.values[1] - 3.0).abs() < 1e-14);
    }
}
