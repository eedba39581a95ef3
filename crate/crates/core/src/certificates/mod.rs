//! Recovery thresholds, conditioning estimates and error bounds.

pub mod bounds;
pub mod oracles;
pub mod xi;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

pub use bounds::{
    error_bound, gamma_lower_bound, sigma_grid_estimate, sigma_lower_bound, sigma_lower_bound_for,
    stability_bound_general, BoundValue, Regime,
};
pub use oracles::{
    general_recovery_check, pi_c_bruteforce, ratio_condition_oracle, RatioOracle, RecoveryVerdict,
};
pub use xi::{correctable_count, recovery_threshold, xi_amplitude, XiResult};

use crate::error::{Error, Result};

/// One point `r -> B(r)` of a bound curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub r: usize,
    pub value: BoundValue,
}

impl Serialize for BoundPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BoundPoint", 3)?;
        st.serialize_field("r", &self.r)?;
        st.serialize_field("B", &self.value.finite())?;
        st.serialize_field("regime", &self.value.regime())?;
        st.end()
    }
}

/// Everything computable from the regressors alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub n: usize,
    pub big_n: usize,
    pub xi: f64,
    pub gamma_k: Vec<DVector<f64>>,
    pub t_of_xi: f64,
    pub sigma_lb: f64,
    /// `B(r)` for every `r` with `N - r < T`, from `r = N` downwards.
    pub bound_curve: Vec<BoundPoint>,
}

impl Serialize for Certificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Certificate", 6)?;
        st.serialize_field("xi", &self.xi)?;
        st.serialize_field("T", &self.t_of_xi)?;
        st.serialize_field("sigma_lb", &self.sigma_lb)?;
        st.serialize_field("bound_curve", &self.bound_curve)?;
        st.serialize_field("N", &self.big_n)?;
        st.serialize_field("n", &self.n)?;
        st.end()
    }
}

impl Certificate {
    /// Computes the certificate with the eigenvalue underestimate of sigma.
    pub fn compute(x: &DMatrix<f64>) -> Result<Self> {
        Self::with_sigma(x, sigma_lower_bound(x))
    }

    pub fn with_sigma(x: &DMatrix<f64>, sigma: f64) -> Result<Self> {
        let xi = xi_amplitude(x)?;
        let t = recovery_threshold(xi.xi)?;
        if !(sigma > 0.0) {
            return Err(Error::Rank(format!("conditioning estimate {sigma} is not positive")));
        }
        let big_n = x.ncols();
        let mut curve = Vec::new();
        for r in (0..=big_n).rev() {
            let value = error_bound(r, big_n, t, sigma)?;
            if !value.is_finite() {
                break;
            }
            curve.push(BoundPoint { r, value });
        }
        Ok(Certificate {
            n: x.nrows(),
            big_n,
            xi: xi.xi,
            gamma_k: xi.gamma_k,
            t_of_xi: t,
            sigma_lb: sigma,
            bound_curve: curve,
        })
    }

    pub fn error_bound(&self, r: usize) -> Result<BoundValue> {
        error_bound(r, self.big_n, self.t_of_xi, self.sigma_lb)
    }

    /// Outlier counts guaranteed to be corrected.
    pub fn correctable(&self) -> usize {
        correctable_count(self.t_of_xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::drop_column;
    use nalgebra::dmatrix;

    #[test]
    fn certificate_fields() {
        let x = dmatrix![1.0, 0.0, 1.0, 0.0, 1.0, 0.0; 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let c = Certificate::compute(&x).unwrap();
        assert!((c.xi - 0.5).abs() < 1e-12);
        assert!((c.t_of_xi - 1.5).abs() < 1e-12);
        assert!((c.sigma_lb - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.correctable(), 1);
        assert_eq!(c.bound_curve.len(), 2);
        assert_eq!(c.bound_curve[0].r, 6);
        assert!((c.bound_curve[0].value.finite().unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        for (k, g) in c.gamma_k.iter().enumerate() {
            assert!((drop_column(&x, k) * g - x.column(k)).norm() < 1e-7);
        }
    }

    #[test]
    fn certificate_json() {
        let c = Certificate::compute(&DMatrix::from_element(1, 5, 1.0)).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["xi"], 0.25);
        assert_eq!(v["T"], 2.5);
        assert_eq!(v["N"], 5);
        assert_eq!(v["n"], 1);
        assert_eq!(v["bound_curve"].as_array().unwrap().len(), 3);
        let p = BoundPoint { r: 1, value: BoundValue::Unstable };
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"r":1,"B":null,"regime":"unstable"}"#
        );
    }
}
