//! Vertex descent for a single least-absolute-deviations row, used to turn
//! an approximate splitting iterate into an exact vertex.

use nalgebra::{DMatrix, DVector, RowDVector};

use super::lp::{solve_lp, LinearProgram, LpStatus};
use crate::linalg::select_columns;

/// Dual feasibility slack when deciding that a vertex is optimal.
const DUAL_TOL: f64 = 1e-9;
/// Residuals below this fraction of `max(1, max |y|)` count as exact fits.
const ZERO_RTOL: f64 = 1e-11;

pub(crate) struct Vertex {
    pub theta: RowDVector<f64>,
    pub objective: f64,
    /// Every basis subgradient ended within `[-1, 1]`.
    pub optimal: bool,
}

fn fit(y: &RowDVector<f64>, x: &DMatrix<f64>, basis: &[usize]) -> Option<RowDVector<f64>> {
    let xz = select_columns(x, basis);
    let yz = RowDVector::from_iterator(basis.len(), basis.iter().map(|&t| y[t]));
    xz.transpose().lu().solve(&yz.transpose()).map(|v| v.transpose())
}

/// Minimizes `sum_t |y_t - theta x_t|` by pivoting from the vertex that
/// interpolates `basis`, which must index `n` linearly independent columns.
///
/// At a vertex with basis `Z` the subgradients on `Z` are forced to
/// `g = -X_Z^{-1} s` with `s = sum_{t not in Z} sign(r_t) x_t`. If some
/// `|g_j| > 1`, releasing column `j` is a descent direction, and the exact
/// line search along it stops at the weighted median of the breakpoints.
pub(crate) fn lad_vertex_descent(
    y: &RowDVector<f64>,
    x: &DMatrix<f64>,
    basis: &[usize],
    max_pivots: usize,
) -> Option<Vertex> {
    let (n, big_n) = x.shape();
    debug_assert_eq!(basis.len(), n);
    let mut basis = basis.to_vec();
    let mut theta = fit(y, x, &basis)?;
    let mut in_basis = vec![false; big_n];
    for &t in &basis {
        in_basis[t] = true;
    }
    let objective = |theta: &RowDVector<f64>| (y - theta * x).lp_norm(1);
    let mut obj = objective(&theta);
    let zero_tol = ZERO_RTOL * y.amax().max(1.0);

    for _ in 0..max_pivots {
        let r = y - &theta * x;
        let is_zero = |t: usize| r[t].abs() <= zero_tol;
        let mut s = DVector::<f64>::zeros(n);
        for t in (0..big_n).filter(|&t| !in_basis[t] && !is_zero(t)) {
            s.axpy(r[t].signum(), &x.column(t), 1.0);
        }
        let xz = select_columns(x, &basis);
        let g = -xz.clone().lu().solve(&s)?;
        let (j, gj) = g
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
        if gj.abs() <= 1.0 + DUAL_TOL {
            return Some(Vertex { theta, objective: obj, optimal: true });
        }
        let exact: Vec<usize> = (0..big_n).filter(|&t| in_basis[t] || is_zero(t)).collect();
        if exact.len() > n && degenerate_optimal(x, &exact, &s) {
            return Some(Vertex { theta, objective: obj, optimal: true });
        }

        // delta X_Z = c e_j^T with c = -sign(g_j)
        let mut e = DVector::<f64>::zeros(n);
        e[j] = -gj.signum();
        let delta = xz.transpose().lu().solve(&e)?.transpose();
        let dx = &delta * x;

        let mut slope = 1.0 - gj.abs();
        let mut breaks: Vec<(f64, usize)> = (0..big_n)
            .filter(|&t| !in_basis[t] && dx[t] != 0.0)
            .filter_map(|t| {
                let tau = if is_zero(t) { 0.0 } else { r[t] / dx[t] };
                (tau >= 0.0).then_some((tau, t))
            })
            .collect();
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut step = None;
        for (tau, t) in breaks {
            slope += 2.0 * dx[t].abs();
            if slope >= 0.0 {
                step = Some((tau, t));
                break;
            }
        }
        // Unbounded descent cannot happen for a full-rank X.
        let (_, enter) = step?;
        in_basis[basis[j]] = false;
        basis[j] = enter;
        in_basis[enter] = true;
        let next = fit(y, x, &basis)?;
        let next_obj = objective(&next);
        if !(next_obj <= obj + 1e-15 * obj.max(1.0)) {
            break;
        }
        theta = next;
        obj = next_obj;
    }
    Some(Vertex { theta, objective: obj, optimal: false })
}

/// At a degenerate vertex every exactly fitted column may carry any
/// subgradient in `[-1, 1]`, so optimality is the feasibility of
/// `X_K w = -s` with `|w| <= 1`.
fn degenerate_optimal(x: &DMatrix<f64>, exact: &[usize], s: &DVector<f64>) -> bool {
    let k = exact.len();
    let lp = LinearProgram {
        c: DVector::zeros(k),
        a_eq: select_columns(x, exact),
        b_eq: -s,
        lower: vec![-1.0 - DUAL_TOL; k],
        upper: vec![1.0 + DUAL_TOL; k],
    };
    matches!(solve_lp(&lp), Ok(sol) if sol.status == LpStatus::Optimal)
}
