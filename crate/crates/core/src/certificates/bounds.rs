//! Conditioning estimates and the error bounds built on them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{InnerNorm, LossSpec};

/// `sqrt(lambda_min(X X^T))`, clamped at zero.
pub fn sigma_lower_bound(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    let gram = x * x.transpose();
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.min().max(0.0).sqrt()
}

/// Underestimate of the loss conditioning for an `m`-row parameter matrix.
///
/// The eigenvalue bound holds for the 1- and 2-norm columns; with the
/// max-norm a column can be `sqrt(m)` times smaller in the loss than in the
/// Euclidean norm, so the bound is divided accordingly.
pub fn sigma_lower_bound_for(x: &DMatrix<f64>, spec: &LossSpec, m: usize) -> f64 {
    let s = sigma_lower_bound(x);
    match spec.inner {
        InnerNorm::LInf if m > 1 => s / (m as f64).sqrt(),
        _ => s,
    }
}

/// Grid minimum of `||X^T eta||_1` over unit vectors `eta`.
///
/// For `n = 1` the two unit vectors are used directly. For `n = 2` the grid
/// is the angles `2 pi j / grid_points`, so refining by an integer factor
/// can only lower the estimate. For `n = 3` a Fibonacci lattice with
/// `grid_points` points is used.
pub fn sigma_grid_estimate(x: &DMatrix<f64>, grid_points: usize) -> Result<f64> {
    let n = x.nrows();
    let ratio = |eta: &DVector<f64>| (x.transpose() * eta).lp_norm(1);
    match n {
        1 => Ok(x.iter().map(|v| v.abs()).sum()),
        2 => {
            check_grid(grid_points)?;
            Ok((0..grid_points)
                .map(|j| {
                    let th = std::f64::consts::TAU * j as f64 / grid_points as f64;
                    ratio(&DVector::from_vec(vec![th.cos(), th.sin()]))
                })
                .fold(f64::INFINITY, f64::min))
        }
        3 => {
            check_grid(grid_points)?;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..grid_points)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / grid_points as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let th = golden * j as f64;
                    ratio(&DVector::from_vec(vec![rad * th.cos(), rad * th.sin(), z]))
                })
                .fold(f64::INFINITY, f64::min))
        }
        _ => Err(Error::InvalidArgument(format!(
            "sigma grid estimate supports n in {{1, 2, 3}}, got {n}"
        ))),
    }
}

fn check_grid(points: usize) -> Result<()> {
    if points == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point".into()));
    }
    Ok(())
}

/// A bound that is either a finite number or undefined because the outlier
/// count is outside the stability regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundValue {
    Finite(f64),
    Unstable,
}

impl BoundValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            BoundValue::Finite(v) => Some(v),
            BoundValue::Unstable => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, BoundValue::Finite(_))
    }

    pub fn regime(self) -> Regime {
        match self {
            BoundValue::Finite(_) => Regime::Stable,
            BoundValue::Unstable => Regime::Unstable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Stable,
    Unstable,
}

/// Error gain `2 / (sigma * (1 - (N - r) / T))` for `r` clean columns out of
/// `big_n`, or `Unstable` once `N - r >= T`.
pub fn error_bound(r: usize, big_n: usize, threshold: f64, sigma: f64) -> Result<BoundValue> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    if r > big_n {
        return Err(Error::InvalidArgument(format!("r = {r} exceeds N = {big_n}")));
    }
    let outliers = (big_n - r) as f64;
    if outliers >= threshold {
        return Ok(BoundValue::Unstable);
    }
    Ok(BoundValue::Finite(2.0 / (sigma * (1.0 - outliers / threshold))))
}

/// `sigma * (1 - |S^c| / T)`, a lower bound on the restricted conditioning.
pub fn gamma_lower_bound(outliers: usize, threshold: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !((outliers as f64) < threshold) {
        return Err(Error::UnstableRegime(format!(
            "{outliers} outliers is not below the threshold {threshold}"
        )));
    }
    Ok(sigma * (1.0 - outliers as f64 / threshold))
}

/// `[2 ell(E_S0) + |I_eps^c| eps] / gamma`.
pub fn stability_bound_general(ell_e_s0: f64, card_i_eps: usize, eps: f64, gamma_lb: f64) -> Result<f64> {
    if !(gamma_lb > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma_lb}")));
    }
    if !(ell_e_s0 >= 0.0) || !(eps >= 0.0) {
        return Err(Error::InvalidArgument("noise level and eps must be nonnegative".into()));
    }
    Ok((2.0 * ell_e_s0 + card_i_eps as f64 * eps) / gamma_lb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn eigen_bound() {
        assert!((sigma_lower_bound(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-14);
        assert!((sigma_lower_bound(&dmatrix![2.0, 0.0; 0.0, 3.0]) - 2.0).abs() < 1e-14);
        let x = dmatrix![1.0, 0.0, 1.0, 0.0; 0.0, 1.0, 0.0, 1.0];
        assert!((sigma_lower_bound(&x) - 2f64.sqrt()).abs() < 1e-14);
        // Rank-deficient: clamped at zero rather than a tiny negative root.
        assert_eq!(sigma_lower_bound(&dmatrix![1.0, 2.0; 2.0, 4.0]), 0.0);
    }

    #[test]
    fn max_norm_scaling() {
        let x = DMatrix::identity(2, 2);
        let spec = LossSpec::new(InnerNorm::LInf, 0.0).unwrap();
        assert!((sigma_lower_bound_for(&x, &spec, 4) - 0.5).abs() < 1e-14);
        assert_eq!(sigma_lower_bound_for(&x, &spec, 1), 1.0);
    }

    #[test]
    fn grid_estimates() {
        let i2 = DMatrix::identity(2, 2);
        assert!((sigma_grid_estimate(&i2, 360).unwrap() - 1.0).abs() < 1e-12);
        let x = dmatrix![1.0, 0.0, 1.0, 0.0; 0.0, 1.0, 0.0, 1.0];
        assert!((sigma_grid_estimate(&x, 360).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(sigma_grid_estimate(&DMatrix::from_element(1, 5, 1.0), 10).unwrap(), 5.0);
        assert!(sigma_grid_estimate(&DMatrix::identity(4, 4), 100).is_err());
        let i3 = DMatrix::identity(3, 3);
        let s3 = sigma_grid_estimate(&i3, 5000).unwrap();
        assert!(s3 >= 1.0 && s3 < 1.1, "{s3}");
    }

    #[test]
    fn grid_refinement_never_increases() {
        let x = dmatrix![0.3, -1.2, 0.8, 2.0, 0.1; 1.0, 0.4, -0.7, 0.2, -1.5];
        let coarse = sigma_grid_estimate(&x, 360).unwrap();
        let fine = sigma_grid_estimate(&x, 3600).unwrap();
        assert!(fine <= coarse);
        assert!(sigma_lower_bound(&x) <= fine + 1e-9);
    }

    #[test]
    fn bound_formula() {
        let b = error_bound(10, 10, 2.5, 4.0).unwrap();
        assert_eq!(b, BoundValue::Finite(0.5));
        assert_eq!(error_bound(8, 10, 2.0, 1.0).unwrap(), BoundValue::Unstable);
        assert_eq!(error_bound(9, 10, 2.0, 1.0).unwrap(), BoundValue::Finite(4.0));
        assert!(error_bound(9, 10, 2.0, 0.0).is_err());
        assert!(error_bound(11, 10, 2.0, 1.0).is_err());
        let mut prev = 0.0;
        for r in (0..=20).rev() {
            match error_bound(r, 20, 6.3, 1.0).unwrap() {
                BoundValue::Finite(v) => {
                    assert!(v > prev);
                    prev = v;
                }
                BoundValue::Unstable => assert!(20 - r >= 7),
            }
        }
    }

    #[test]
    fn gamma_bound() {
        assert_eq!(gamma_lower_bound(0, 3.0, 2.0).unwrap(), 2.0);
        assert!((gamma_lower_bound(1, 2.5, 5.0).unwrap() - 3.0).abs() < 1e-14);
        assert!(gamma_lower_bound(2, 2.000001, 1.0).unwrap() < 1e-6);
        assert!(matches!(gamma_lower_bound(3, 2.5, 1.0), Err(Error::UnstableRegime(_))));
    }

    #[test]
    fn general_stability_bound() {
        assert_eq!(stability_bound_general(0.0, 0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(stability_bound_general(1.0, 0, 0.0, 2.0).unwrap(), 1.0);
        assert_eq!(
            stability_bound_general(1.0, 0, 0.7, 2.0).unwrap(),
            stability_bound_general(1.0, 0, 0.0, 2.0).unwrap()
        );
        assert_eq!(stability_bound_general(1.0, 2, 0.5, 2.0).unwrap(), 1.5);
        assert!(stability_bound_general(1.0, 0, 0.0, 0.0).is_err());
    }
}
