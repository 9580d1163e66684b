//! Small dense symmetric solves for the ridge normal equations.
//!
//! Dimensions here are the number of features (a few dozen at most), so
//! plain row-major `Vec<f64>` matrices are enough.

use serde::{Deserialize, Serialize};

/// How a normal-equation system was solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveKind {
    Cholesky,
    /// The system was singular; the minimum-norm solution was returned.
    PseudoInverse,
}

/// Solves `(A + λI) x = b` for symmetric positive semi-definite `A`
/// (row-major, n×n). Falls back to the pseudo-inverse when the shifted
/// matrix is not numerically positive definite.
pub fn solve_ridge(a: &[f64], b: &[f64], lambda: f64) -> (Vec<f64>, SolveKind) {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    for i in 0..n {
        m[i * n + i] += lambda;
    }
    match cholesky(&m, n) {
        Some(l) => (cholesky_solve(&l, b, n), SolveKind::Cholesky),
        None => (pinv_solve(&m, b, n), SolveKind::PseudoInverse),
    }
}

/// Lower-triangular factor, or `None` if a pivot is not safely positive.
fn cholesky(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max);
    let tol = scale * n as f64 * f64::EPSILON;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns of a row-major matrix).
fn jacobi_eigen(m: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = m.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

fn pinv_solve(m: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let (vals, vecs) = jacobi_eigen(m, n);
    let max = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = max * n as f64 * 1e-12;
    let mut x = vec![0.0; n];
    for k in 0..n {
        if vals[k].abs() <= cutoff {
            continue;
        }
        let proj: f64 = (0..n).map(|i| vecs[i * n + k] * b[i]).sum::<f64>() / vals[k];
        for i in 0..n {
            x[i] += proj * vecs[i * n + k];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_system() {
        let (x, kind) = solve_ridge(&[1.0, 0.0, 0.0, 1.0], &[2.0, 3.0], 0.0);
        assert_eq!(kind, SolveKind::Cholesky);
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn singular_system_gives_minimum_norm() {
        // x + y = 2 observed once: normal matrix [[1,1],[1,1]], rhs [2,2]
        let (x, kind) = solve_ridge(&[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0], 0.0);
        assert_eq!(kind, SolveKind::PseudoInverse);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12, "{x:?}");

        let (z, kind) = solve_ridge(&[0.0; 4], &[0.0; 2], 0.0);
        assert_eq!(kind, SolveKind::PseudoInverse);
        assert_eq!(z, [0.0, 0.0]);
    }

    #[test]
    fn eigen_reconstructs() {
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0];
        let (vals, vecs) = jacobi_eigen(&m, 3);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[i * 3 + k] * vals[k] * vecs[j * 3 + k]).sum();
                assert!((r - m[i * 3 + j]).abs() < 1e-10);
            }
        }
    }
}
