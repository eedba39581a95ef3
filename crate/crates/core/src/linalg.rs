//! Small dense linear-algebra helpers shared by the solvers and certificates.

use nalgebra::{DMatrix, DVector};

/// Relative threshold used for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

/// Singular values of `m`, in no particular order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    // nalgebra's SVD is happier with tall matrices.
    if m.nrows() < m.ncols() {
        m.transpose().singular_values()
    } else {
        m.singular_values()
    }
}

/// Numerical rank with threshold `RANK_RTOL * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

/// Smallest singular value divided by the largest (0 for an all-zero matrix).
pub fn relative_min_singular_value(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 || !smin.is_finite() {
        0.0
    } else {
        smin / smax
    }
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().cloned().fold(0.0_f64, f64::max)
}

/// Matrix formed by the listed columns of `m`, in order.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// `m` with column `k` removed.
pub fn drop_column(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    m.clone().remove_column(k)
}

/// Euclidean norms of each column.
pub fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// Least-squares solve of `A X = Y` for `A`, i.e. `Y X^T (X X^T)^{-1}`.
/// Returns `None` when `X X^T` is not positive definite.
pub fn least_squares_rows(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let gram = x * x.transpose();
    let chol = gram.cholesky()?;
    // A G = Y X^T  <=>  G A^T = X Y^T  (G symmetric)
    let rhs = x * y.transpose();
    Some(chol.solve(&rhs).transpose())
}
