//! Sample covariance and its largest eigenvalue.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::rng;

/// Population covariance `(1/N) Σ (xᵢ − x̄)(xᵢ − x̄)ᵀ`.
pub fn covariance_matrix(data: &Matrix) -> Result<Matrix> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::TooFewRows {
            context: "covariance",
            needed: 2,
            got: n,
        });
    }
    let d = data.cols();
    let mean = data.column_means();
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in data.iter_rows() {
        for ((c, x), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = x - m;
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            let out = cov.row_mut(a);
            for b in a..d {
                out[b] += ca * centered[b];
            }
        }
    }
    let inv = 1.0 / n as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov.get(a, b) * inv;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    Ok(cov)
}

const RESTART_SEED: u64 = 0x5eed_e16e;

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Starts from the normalized all-ones vector and stops when successive
/// Rayleigh quotients differ by less than `tol`. A second run from a
/// fixed-seed random vector covers the case where the all-ones start is
/// orthogonal to the top eigenvector; the larger estimate is returned.
pub fn top_eigenvalue(m: &Matrix, tol: f64, max_iters: usize) -> Result<f64> {
    let d = m.rows();
    m.ensure_shape("top_eigenvalue", d, d)?;
    if d == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let ones = vec![1.0; d];
    let first = power_iteration(m, ones, tol, max_iters)?;
    let mut r = rng::prng(RESTART_SEED);
    let probe: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut r)).collect();
    let second = power_iteration(m, probe, tol, max_iters)?;
    Ok(first.max(second))
}

fn power_iteration(m: &Matrix, start: Vec<f64>, tol: f64, max_iters: usize) -> Result<f64> {
    let d = m.rows();
    let mut v = start;
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Ok(0.0);
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut w = vec![0.0; d];
    let mut previous = f64::NAN;
    for _ in 0..max_iters {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = dot(m.row(i), &v);
        }
        let rayleigh = dot(&v, &w);
        if (rayleigh - previous).abs() < tol {
            return Ok(rayleigh);
        }
        previous = rayleigh;
        let wn = norm(&w);
        if wn == 0.0 {
            // v lies in the null space.
            return Ok(0.0);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        estimate: previous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Cyclic Jacobi rotations; independent dense oracle for the spectrum.
    fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
        let n = m.rows();
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += a[i][j] * a[i][j];
                    }
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
        ev
    }

    fn naive_cov(data: &Matrix) -> Matrix {
        let n = data.rows();
        let d = data.cols();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                mean[j] += data.get(i, j) / n as f64;
            }
        }
        Matrix::from_fn(d, d, |a, b| {
            let mut s = 0.0;
            for i in 0..n {
                s += (data.get(i, a) - mean[a]) * (data.get(i, b) - mean[b]);
            }
            s / n as f64
        })
    }

    #[test]
    fn two_point_covariance() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let c = covariance_matrix(&m).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_samples_have_zero_covariance() {
        let m = Matrix::from_rows(&[[2.0, 3.0], [2.0, 3.0], [2.0, 3.0]]).unwrap();
        assert!(covariance_matrix(&m).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn covariance_needs_two_rows() {
        let m = Matrix::from_rows(&[[2.0, 3.0]]).unwrap();
        assert!(matches!(covariance_matrix(&m), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn covariance_matches_double_loop() {
        let mut r = rng::prng(21);
        for _ in 0..10 {
            let data = Matrix::from_fn(37, 6, |_, _| 3.0 * rng::standard_normal(&mut r) + 1.0);
            let a = covariance_matrix(&data).unwrap();
            let b = naive_cov(&data);
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() < 1e-10);
            }
            for i in 0..6 {
                for j in 0..6 {
                    assert!((a.get(i, j) - a.get(j, i)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let l = top_eigenvalue(&Matrix::identity(3), 1e-12, 1000).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let d = Matrix::from_rows(&[[3.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((top_eigenvalue(&d, 1e-14, 1000).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn ones_start_orthogonal_to_top_eigenvector() {
        // Top eigenvector (1, -1)/√2 is orthogonal to the all-ones start.
        let m = Matrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap();
        assert!((top_eigenvalue(&m, 1e-14, 10_000).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn random_psd_matches_jacobi() {
        let mut r = rng::prng(33);
        for _ in 0..20 {
            let a = Matrix::from_fn(8, 8, |_, _| rng::standard_normal(&mut r));
            // A Aᵀ is PSD
            let m = Matrix::from_fn(8, 8, |i, j| dot(a.row(i), a.row(j)));
            let oracle = jacobi_eigenvalues(&m);
            let got = top_eigenvalue(&m, 1e-14, 100_000).unwrap();
            assert!((got - oracle[0]).abs() < 1e-8, "{got} vs {}", oracle[0]);
        }
    }

    #[test]
    fn non_convergence_carries_estimate() {
        let d = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.999]]).unwrap();
        match top_eigenvalue(&d, 0.0, 3) {
            Err(Error::NoConvergence { iterations, estimate }) => {
                assert_eq!(iterations, 3);
                assert!(estimate > 0.99);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dominates_random_rayleigh_quotients() {
        let mut r = rng::prng(44);
        let data = Matrix::from_fn(200, 5, |_, j| (j as f64 + 1.0) * rng::standard_normal(&mut r));
        let c = covariance_matrix(&data).unwrap();
        let tol = 1e-12;
        let l = top_eigenvalue(&c, tol, 100_000).unwrap();
        for _ in 0..50 {
            let v: Vec<f64> = (0..5).map(|_| rng::standard_normal(&mut r)).collect();
            let cv: Vec<f64> = (0..5).map(|i| dot(c.row(i), &v)).collect();
            let rq = dot(&v, &cv) / dot(&v, &v);
            assert!(rq <= l + 1e-9);
        }
    }
}
