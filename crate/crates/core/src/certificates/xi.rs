//! Self-decomposability amplitude.
//!
//! For each column `x_k` the minimal `||gamma||_inf` with
//! `x_k = X_{!k} gamma` is obtained from the equivalent program
//!
//! ```text
//! max s   s.t.   X_{!k} g - s x_k = 0,   -1 <= g <= 1,   s >= 0,
//! ```
//!
//! whose optimum gives `min ||gamma||_inf = 1 / s*` and `gamma = g* / s*`.
//! It has only `n` equality rows, so the simplex tableau stays tiny.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{drop_column, numerical_rank};
use crate::solver::lp::{solve_lp, LinearProgram, LpStatus};

/// Reconstruction tolerance for the returned coefficient vectors.
pub const RECONSTRUCTION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct XiResult {
    pub xi: f64,
    /// Column index attaining the maximum.
    pub argmax: usize,
    /// Per-column minimizers; `gamma_k[k]` has length `N - 1`.
    pub gamma_k: Vec<DVector<f64>>,
    /// Per-column optimal values.
    pub per_column: Vec<f64>,
}

/// Computes `xi(X) = max_k min { ||gamma||_inf : x_k = X_{!k} gamma }`.
pub fn xi_amplitude(x: &DMatrix<f64>) -> Result<XiResult> {
    let (n, big_n) = x.shape();
    if n == 0 || big_n < 2 {
        return Err(Error::Shape(format!("xi needs at least two columns, got {n}x{big_n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("X has non-finite entries".into()));
    }
    if numerical_rank(x) < n {
        return Err(Error::Rank("X does not have full row rank".into()));
    }
    let cols: Vec<(f64, DVector<f64>)> = (0..big_n)
        .into_par_iter()
        .map(|k| column_amplitude(x, k))
        .collect::<Result<_>>()?;

    let mut argmax = 0;
    for (k, (v, _)) in cols.iter().enumerate() {
        if *v > cols[argmax].0 {
            argmax = k;
        }
    }
    let xi = cols[argmax].0;
    let (per_column, gamma_k) = cols.into_iter().unzip();
    Ok(XiResult {
        xi,
        argmax,
        gamma_k,
        per_column,
    })
}

/// `min ||gamma||_inf` for column `k` together with a minimizer.
pub fn column_amplitude(x: &DMatrix<f64>, k: usize) -> Result<(f64, DVector<f64>)> {
    let (n, big_n) = x.shape();
    let rest = drop_column(x, k);
    if numerical_rank(&rest) < n {
        return Err(Error::Rank(format!(
            "X without column {} is rank deficient; X is not self-decomposable",
            k + 1
        )));
    }
    let xk = x.column(k);
    if xk.iter().all(|v| *v == 0.0) {
        return Ok((0.0, DVector::zeros(big_n - 1)));
    }

    let nv = big_n;
    let mut a = DMatrix::<f64>::zeros(n, nv);
    a.columns_mut(0, big_n - 1).copy_from(&rest);
    a.set_column(big_n - 1, &(-xk));
    let mut c = DVector::<f64>::zeros(nv);
    c[nv - 1] = -1.0;
    let mut lower = vec![-1.0; nv];
    let mut upper = vec![1.0; nv];
    lower[nv - 1] = 0.0;
    upper[nv - 1] = f64::INFINITY;
    let lp = LinearProgram {
        c,
        a_eq: a,
        b_eq: DVector::zeros(n),
        lower,
        upper,
    };
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!(
            "amplitude program for column {} ended with status {:?}",
            k + 1,
            sol.status
        )));
    }
    let s = sol.x[nv - 1];
    if !(s > 0.0) {
        return Err(Error::Numerical(format!(
            "column {} could not be reconstructed from the others",
            k + 1
        )));
    }
    let gamma = sol.x.rows(0, big_n - 1) / s;
    let resid = (&rest * &gamma - xk).norm();
    if resid > RECONSTRUCTION_TOL * xk.norm().max(1.0) {
        return Err(Error::Numerical(format!(
            "reconstruction residual {resid:e} for column {}",
            k + 1
        )));
    }
    Ok((gamma.amax(), gamma))
}

/// Recovery threshold `T(alpha) = (1 + 1/alpha) / 2`.
pub fn recovery_threshold(xi: f64) -> Result<f64> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::InvalidArgument(format!("xi must be positive, got {xi}")));
    }
    Ok(0.5 * (1.0 + 1.0 / xi))
}

/// Largest outlier count strictly below the threshold `t`.
pub fn correctable_count(t: f64) -> usize {
    let c = t.ceil();
    if c <= 0.0 {
        0
    } else {
        (c as usize).saturating_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn ones_row() {
        let x = DMatrix::from_element(1, 5, 1.0);
        let r = xi_amplitude(&x).unwrap();
        assert!((r.xi - 0.25).abs() < 1e-12);
        for g in &r.gamma_k {
            assert!(g.iter().all(|v| (v - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn repeated_identity() {
        let x = dmatrix![1.0, 0.0, 1.0, 0.0, 1.0, 0.0; 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert!((xi_amplitude(&x).unwrap().xi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn square_complements() {
        let x = dmatrix![1.0, 0.0, 1.0; 0.0, 1.0, 1.0];
        let r = xi_amplitude(&x).unwrap();
        assert!((r.xi - 1.0).abs() < 1e-12);
        for k in 0..3 {
            let rest = drop_column(&x, k);
            assert!((&rest * &r.gamma_k[k] - x.column(k)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_column_costs_nothing() {
        let x = dmatrix![1.0, 2.0, 0.0, -1.0];
        let r = xi_amplitude(&x).unwrap();
        assert_eq!(r.per_column[2], 0.0);
        assert!((r.xi - 2.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn not_self_decomposable() {
        // Column 3 is the only one with a second-coordinate component.
        let x = dmatrix![1.0, 1.0, 0.0; 0.0, 0.0, 1.0];
        match xi_amplitude(&x) {
            Err(Error::Rank(msg)) => assert!(msg.contains("column 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(recovery_threshold(1.0).unwrap(), 1.0);
        assert_eq!(recovery_threshold(0.5).unwrap(), 1.5);
        assert!((recovery_threshold(0.0083).unwrap() - 60.74096385542169).abs() < 1e-9);
        assert!(recovery_threshold(0.0).is_err());
        assert!(recovery_threshold(-1.0).is_err());
        assert_eq!(correctable_count(1.0), 0);
        assert_eq!(correctable_count(1.5), 1);
        assert_eq!(correctable_count(2.5), 2);
        assert_eq!(correctable_count(3.0), 2);
    }
}
