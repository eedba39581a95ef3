//! Column-wise summable losses `phi(B) = sum_i max(0, ||b_i||_p - eps0)`.
//!
//! Each loss comes with a dominating matrix norm `ell(B) = sum_i ||b_i||_p`
//! and an insensitivity constant `eps = eps0`. Together they satisfy
//!
//! * summability: `phi([B | C]) = phi(B) + phi(C)`,
//! * domination: `phi(B) <= phi(B - C) + ell(C)`,
//! * sandwich: `ell(B) - |{i : ||b_i||_p > eps}| * eps <= phi(B) <= ell(B)`.
//!
//! [`check_p_properties`] tests all three on random matrices.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ensure_finite, IndexSet};
use crate::error::{Error, Result};

/// Vector norm applied to each column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum InnerNorm {
    L1,
    L2,
    LInf,
}

impl InnerNorm {
    pub fn norm(self, v: DVectorView<'_, f64>) -> f64 {
        match self {
            InnerNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            InnerNorm::L2 => v.norm(),
            InnerNorm::LInf => v.amax(),
        }
    }

    pub fn norm_of(self, v: &DVector<f64>) -> f64 {
        self.norm(v.as_view())
    }
}

impl TryFrom<serde_json::Value> for InnerNorm {
    type Error = String;

    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        match &v {
            serde_json::Value::Number(n) if n.as_f64() == Some(1.0) => Ok(InnerNorm::L1),
            serde_json::Value::Number(n) if n.as_f64() == Some(2.0) => Ok(InnerNorm::L2),
            serde_json::Value::String(s) if matches!(s.as_str(), "inf" | "Inf" | "infinity") => {
                Ok(InnerNorm::LInf)
            }
            serde_json::Value::String(s) if s == "1" => Ok(InnerNorm::L1),
            serde_json::Value::String(s) if s == "2" => Ok(InnerNorm::L2),
            _ => Err(format!("unsupported inner norm {v}; expected 1, 2 or \"inf\"")),
        }
    }
}

impl From<InnerNorm> for serde_json::Value {
    fn from(p: InnerNorm) -> Self {
        match p {
            InnerNorm::L1 => 1.into(),
            InnerNorm::L2 => 2.into(),
            InnerNorm::LInf => "inf".into(),
        }
    }
}

/// Loss specification, serialized as `{"p": 2, "eps0": 0.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    #[serde(rename = "p")]
    pub inner: InnerNorm,
    #[serde(default)]
    pub eps0: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            inner: InnerNorm::L2,
            eps0: 0.0,
        }
    }
}

impl LossSpec {
    pub fn new(inner: InnerNorm, eps0: f64) -> Result<Self> {
        let spec = LossSpec { inner, eps0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Sum of column 2-norms.
    pub fn sum_of_l2() -> Self {
        LossSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 >= 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps0 must be a finite nonnegative number, got {}",
                self.eps0
            )));
        }
        Ok(())
    }

    /// True when the loss is itself a norm (`eps0 == 0`).
    pub fn is_norm(&self) -> bool {
        self.eps0 == 0.0
    }

    /// The certified triple `(phi, ell, eps0)`.
    pub fn triple(&self) -> LossTriple {
        LossTriple {
            spec: *self,
            eps: self.eps0,
        }
    }

    /// Loss of a single column.
    pub fn column_loss(&self, v: DVectorView<'_, f64>) -> f64 {
        (self.inner.norm(v) - self.eps0).max(0.0)
    }
}

/// `phi(B)`, summed left to right over columns.
pub fn eval_phi(spec: &LossSpec, b: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(b, "loss argument")?;
    Ok(phi_unchecked(spec, b))
}

pub(crate) fn phi_unchecked(spec: &LossSpec, b: &DMatrix<f64>) -> f64 {
    b.column_iter()
        .fold(0.0, |acc, c| acc + spec.column_loss(c))
}

/// `ell(B) = sum_i ||b_i||_p`, regardless of `eps0`.
pub fn eval_ell(spec: &LossSpec, b: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(b, "loss argument")?;
    Ok(ell_unchecked(spec, b))
}

pub(crate) fn ell_unchecked(spec: &LossSpec, b: &DMatrix<f64>) -> f64 {
    b.column_iter()
        .fold(0.0, |acc, c| acc + spec.inner.norm(c))
}

/// Columns whose `ell`-norm exceeds `eps0`.
pub fn eps_violation_set(spec: &LossSpec, b: &DMatrix<f64>) -> IndexSet {
    violation_set_at(spec.inner, spec.eps0, b)
}

fn violation_set_at(inner: InnerNorm, eps: f64, b: &DMatrix<f64>) -> IndexSet {
    IndexSet::from_indices(
        b.column_iter()
            .enumerate()
            .filter(|(_, c)| inner.norm(c.as_view()) > eps)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// A loss paired with the constant `eps` claimed for the sandwich property.
///
/// [`LossSpec::triple`] gives the certified pairing; other values of `eps`
/// can be checked to see the property break.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTriple {
    pub spec: LossSpec,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Property {
    Summability,
    Domination,
    Sandwich,
}

/// Matrices witnessing a property failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub property: Property,
    pub trial: usize,
    /// The matrices involved: `[B1, B2]` for summability, `[B, C]` for
    /// domination, `[B]` for the sandwich.
    pub matrices: Vec<Vec<Vec<f64>>>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub trials: usize,
    pub summability_failures: usize,
    pub domination_failures: usize,
    pub sandwich_failures: usize,
    pub first_counterexample: Option<Counterexample>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.summability_failures == 0 && self.domination_failures == 0 && self.sandwich_failures == 0
    }
}

const PROPERTY_TOL: f64 = 1e-10;

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Random matrix whose column norms straddle the interesting scales: each
/// column gets its own log-uniform scale and some are zeroed out.
fn sample_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut c in m.column_iter_mut() {
        if rng.random_bool(0.1) {
            c.fill(0.0);
        } else {
            let scale = 10f64.powf(rng.random_range(-1.5..1.5));
            c.scale_mut(scale);
        }
    }
    m
}

/// Randomized check of summability, domination and the sandwich inequality.
///
/// Failures are recorded in the report; the first one is kept verbatim.
pub fn check_p_properties(
    triple: &LossTriple,
    trials: usize,
    dims: (usize, usize),
    seed: u64,
) -> Result<PropertyReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let (rows, cols) = dims;
    if rows == 0 || cols < 2 {
        return Err(Error::InvalidArgument(
            "property check needs at least one row and two columns".into(),
        ));
    }
    triple.spec.validate()?;
    let spec = &triple.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PropertyReport {
        trials,
        summability_failures: 0,
        domination_failures: 0,
        sandwich_failures: 0,
        first_counterexample: None,
    };
    let record = |report: &mut PropertyReport, cx: Counterexample| {
        match cx.property {
            Property::Summability => report.summability_failures += 1,
            Property::Domination => report.domination_failures += 1,
            Property::Sandwich => report.sandwich_failures += 1,
        }
        if report.first_counterexample.is_none() {
            report.first_counterexample = Some(cx);
        }
    };

    for trial in 0..trials {
        let b = sample_matrix(&mut rng, rows, cols);
        let c = sample_matrix(&mut rng, rows, cols);

        let split = rng.random_range(1..cols);
        let b1 = b.columns(0, split).into_owned();
        let b2 = b.columns(split, cols - split).into_owned();
        let whole = phi_unchecked(spec, &b);
        let parts = phi_unchecked(spec, &b1) + phi_unchecked(spec, &b2);
        if (whole - parts).abs() > PROPERTY_TOL * whole.abs().max(1.0) {
            record(
                &mut report,
                Counterexample {
                    property: Property::Summability,
                    trial,
                    matrices: vec![to_rows(&b1), to_rows(&b2)],
                    lhs: whole,
                    rhs: parts,
                },
            );
        }

        let lhs = phi_unchecked(spec, &b);
        let rhs = phi_unchecked(spec, &(&b - &c)) + ell_unchecked(spec, &c);
        if lhs > rhs + PROPERTY_TOL * rhs.abs().max(1.0) {
            record(
                &mut report,
                Counterexample {
                    property: Property::Domination,
                    trial,
                    matrices: vec![to_rows(&b), to_rows(&c)],
                    lhs,
                    rhs,
                },
            );
        }

        let ell = ell_unchecked(spec, &b);
        let phi = phi_unchecked(spec, &b);
        let count = violation_set_at(spec.inner, triple.eps, &b).len() as f64;
        let lower = ell - count * triple.eps;
        let slack = PROPERTY_TOL * ell.max(1.0);
        if lower > phi + slack || phi > ell + slack {
            let (lhs, rhs) = if lower > phi + slack { (lower, phi) } else { (phi, ell) };
            record(
                &mut report,
                Counterexample {
                    property: Property::Sandwich,
                    trial,
                    matrices: vec![to_rows(&b)],
                    lhs,
                    rhs,
                },
            );
        }
    }
    Ok(report)
}
