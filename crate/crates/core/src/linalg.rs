//! Small real symmetric helpers for the r x r MPF systems.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Eigenvalues (ascending) and eigenvectors (`vecs[k]` is the k-th) of a
/// symmetric row-major matrix.
pub(crate) fn sym_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    debug_assert_eq!(a.len(), n * n);
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let m = Mat::<f64>::from_fn(n, n, |r, c| 0.5 * (a[r * n + c] + a[c * n + r]));
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence {
        routine: "symmetric eigensolver",
        rows: n,
        cols: n,
    })?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    let vals = order.iter().map(|&k| s[k]).collect();
    let vecs = order.iter().map(|&k| (0..n).map(|r| u[(r, k)]).collect()).collect();
    Ok((vals, vecs))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|r| dot(&a[r * n..(r + 1) * n], x)).collect()
}

/// Spectral norm of a symmetric matrix.
pub(crate) fn sym_spectral_norm(a: &[f64], n: usize) -> Result<f64> {
    let (vals, _) = sym_eigen(a, n)?;
    Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Solve a square system by LU with partial pivoting; also returns the
/// 2-norm condition number from the singular values.
pub(crate) fn solve(a: &[f64], n: usize, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = Mat::<f64>::from_fn(n, n, |r, c| a[r * n + c]);
    let s = m.singular_values().map_err(|_| Error::NoConvergence {
        routine: "svd",
        rows: n,
        cols: n,
    })?;
    let (smax, smin) = (s.iter().cloned().fold(0.0, f64::max), s.iter().cloned().fold(f64::INFINITY, f64::min));
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let lu = m.partial_piv_lu();
    let rhs = Mat::<f64>::from_fn(n, 1, |r, _| b[r]);
    let x = faer::linalg::solvers::Solve::solve(&lu, &rhs);
    Ok(((0..n).map(|r| x[(r, 0)]).collect(), cond))
}
