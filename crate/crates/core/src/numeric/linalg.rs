//! Small direct solvers: tridiagonal (Thomas), dense Gaussian elimination and
//! Householder least squares.

use num_traits::{NumOps, Zero};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular system (pivot {0})")]
    Singular(usize),
    #[error("dimension mismatch")]
    Dimension,
}

/// Solve a tridiagonal system in place of `rhs`. `lower[i]` multiplies
/// `x[i-1]` in row `i` (entry 0 unused), `upper[i]` multiplies `x[i+1]`
/// (last entry unused). No pivoting, so the system should be diagonally
/// dominant or otherwise well conditioned for elimination in order.
pub fn solve_tridiagonal<F>(lower: &[F], diag: &[F], upper: &[F], rhs: &mut [F]) -> Result<(), LinalgError>
where
    F: Copy + NumOps + Zero + PartialEq,
{
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(LinalgError::Dimension);
    }
    let mut c = vec![F::zero(); n];
    let mut beta = diag[0];
    if beta == F::zero() {
        return Err(LinalgError::Singular(0));
    }
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == F::zero() {
            return Err(LinalgError::Singular(i));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] = rhs[i] - c[i] * next;
    }
    Ok(())
}

/// Dense solve with partial pivoting. `a` is row-major `n x n`.
pub fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>, LinalgError> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(LinalgError::Dimension);
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if a[piv][col] == T::zero() {
            return Err(LinalgError::Singular(col));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            if m == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - m * v;
            }
            b[row] = b[row] - m * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Ok(x)
}

/// Least-squares solution of the overdetermined system `rows * c = rhs` by
/// Householder QR. Each entry of `rows` is one equation.
pub fn least_squares<T: Real>(rows: &[Vec<T>], rhs: &[T]) -> Result<Vec<T>, LinalgError> {
    let m = rows.len();
    if m == 0 || rhs.len() != m {
        return Err(LinalgError::Dimension);
    }
    let n = rows[0].len();
    if m < n || rows.iter().any(|r| r.len() != n) {
        return Err(LinalgError::Dimension);
    }
    // Column-major copy.
    let mut a: Vec<Vec<T>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut b = rhs.to_vec();
    for k in 0..n {
        let norm = a[k][k..].iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
        if norm == T::zero() {
            return Err(LinalgError::Singular(k));
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |s, x| s + *x * *x);
        if vnorm2 == T::zero() {
            continue;
        }
        for col in a.iter_mut().skip(k) {
            let dot = v.iter().zip(&col[k..]).fold(T::zero(), |s, (p, q)| s + *p * *q);
            let f = T::lit(2.0) * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c = *c - f * *vi;
            }
        }
        let dot = v.iter().zip(&b[k..]).fold(T::zero(), |s, (p, q)| s + *p * *q);
        let f = T::lit(2.0) * dot / vnorm2;
        for (c, vi) in b[k..].iter_mut().zip(&v) {
            *c = *c - f * *vi;
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - a[k][i] * x[k];
        }
        if a[i][i] == T::zero() {
            return Err(LinalgError::Singular(i));
        }
        x[i] = s / a[i][i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn thomas_matches_dense() {
        let n = 6;
        let lower: Vec<f64> = (0..n).map(|i| 0.3 + i as f64 * 0.1).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.7 + i as f64 * 0.05).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = diag[i];
            if i > 0 {
                dense[i][i - 1] = lower[i];
            }
            if i + 1 < n {
                dense[i][i + 1] = upper[i];
            }
        }
        let want = solve_dense(dense, rhs.clone()).unwrap();
        let mut got = rhs;
        solve_tridiagonal(&lower, &diag, &upper, &mut got).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn thomas_accepts_complex() {
        let l = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0)];
        let d = vec![Complex64::new(4.0, 0.0), Complex64::new(3.0, -1.0)];
        let u = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let x = [Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.5)];
        let mut b = vec![d[0] * x[0] + u[0] * x[1], l[1] * x[0] + d[1] * x[1]];
        solve_tridiagonal(&l, &d, &u, &mut b).unwrap();
        assert!((b[0] - x[0]).norm() < 1e-14 && (b[1] - x[1]).norm() < 1e-14);
    }

    #[test]
    fn least_squares_recovers_line() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64]).collect();
        let rhs: Vec<f64> = (0..20).map(|i| 2.0 - 0.5 * i as f64).collect();
        let c = least_squares(&rows, &rhs).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12);
    }
}
