//! Small dense solvers shared by the regression fits and the ELM solve.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on |R_ii| (after column scaling) below which a design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Weighted linear least squares `min Σ w_k (y_k − (Aβ)_k)²`.
///
/// Rows are scaled by `sqrt(w_k)`, each column by the reciprocal of its
/// max-abs entry, and the system is solved with Householder QR. Returns
/// `None` when the scaled design is numerically rank deficient.
pub(crate) fn weighted_least_squares(design: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Option<DVector<f64>> {
    let (rows, cols) = design.shape();
    debug_assert_eq!(rows, y.len());
    debug_assert_eq!(rows, weights.len());
    if rows < cols {
        return None;
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut a = design.clone();
    for (i, sw) in sqrt_w.iter().enumerate() {
        a.row_mut(i).scale_mut(*sw);
    }
    let mut col_scale = vec![1.0; cols];
    for (j, s) in col_scale.iter_mut().enumerate() {
        let m = a.column(j).amax();
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        *s = m;
        a.column_mut(j).unscale_mut(m);
    }
    let b = DVector::from_iterator(rows, y.iter().zip(&sqrt_w).map(|(y, sw)| y * sw));

    let qr = a.qr();
    let r = qr.r();
    let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..cols).any(|i| r[(i, i)].abs() <= RANK_TOL * diag_max) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    let mut beta = r.solve_upper_triangular(&qtb)?;
    for (j, s) in col_scale.iter().enumerate() {
        beta[j] /= s;
    }
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}

/// Solve `(A + shift·I) X = B` for symmetric positive (semi)definite `A` by
/// Cholesky factorization. Returns `None` if the shifted matrix is not
/// numerically positive definite.
pub(crate) fn spd_solve_shifted(a: &DMatrix<f64>, shift: f64, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] += shift;
    }
    let diag_max = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let chol = m.cholesky()?;
    // nalgebra accepts any positive pivot; reject pivots that are pure rounding noise
    let l = chol.l_dirty();
    let min_pivot_sq = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot_sq > 1e-13 * diag_max) {
        return None;
    }
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}
