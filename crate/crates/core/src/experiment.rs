//! Experiment runner: bound curves, exact recovery sweeps and stability
//! checks, with JSON and CSV reports.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    correctable_count, gamma_lower_bound, recovery_threshold, sigma_lower_bound_for,
    stability_bound_general, xi_amplitude, BoundValue, Regime,
};
use crate::data::{normalize_regressors, Dataset};
use crate::error::{Error, Result};
use crate::generators::{gen_regressors, ground_truth_matrix, inject_noise, GeneratorSpec, NoiseSpec};
use crate::linalg::{select_columns, spectral_norm};
use crate::loss::{eps_violation_set, eval_ell, LossSpec};
use crate::solver::{solve_regression, SolverOpts};

pub const SCHEMA_VERSION: u32 = 1;
/// Slack added to the right side of every stability check.
pub const STABILITY_SLACK: f64 = 1e-8;
pub const CSV_HEADER: &str = "outlier_pct,bound,mean_err,max_err,recovery_rate,xi,T,sigma_lb";

fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_recovery_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub generator: GeneratorSpec,
    pub sweep: Vec<NoiseSpec>,
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default)]
    pub solver: SolverOpts,
    #[serde(default = "one")]
    pub trials: usize,
    /// Number of outputs, i.e. rows of the parameter matrix.
    #[serde(default = "one")]
    pub m: usize,
    /// Scale every regressor column to unit Euclidean norm.
    #[serde(default = "yes")]
    pub normalize: bool,
    /// A trial counts as recovered when the spectral error is below this.
    #[serde(default = "default_recovery_tol")]
    pub recovery_tol: f64,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(generator: GeneratorSpec, sweep: Vec<NoiseSpec>) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            generator,
            sweep,
            loss: LossSpec::default(),
            solver: SolverOpts::default(),
            trials: 1,
            m: 1,
            normalize: true,
            recovery_tol: default_recovery_tol(),
            outputs: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.sweep.is_empty() {
            return Err(Error::InvalidArgument("noise sweep must not be empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if !(self.recovery_tol > 0.0) {
            return Err(Error::InvalidArgument("recovery_tol must be positive".into()));
        }
        self.generator.validate()?;
        self.loss.validate()?;
        self.solver.validate()?;
        for s in &self.sweep {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BoundCurve,
    Recovery,
    Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub error: f64,
    pub converged: bool,
    /// Right side of the stability check, when it applies.
    pub bound: Option<f64>,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub outlier_pct: f64,
    pub outliers: usize,
    /// Error gain `B(|S0|, X)`; null outside the stability regime.
    pub bound: Option<f64>,
    pub regime: Regime,
    pub mean_error: Option<f64>,
    pub max_error: Option<f64>,
    pub recovery_rate: Option<f64>,
    pub xi: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub sigma_lb: f64,
    pub violations: usize,
    /// Smallest and median of bound / error over trials with nonzero error.
    pub min_slack: Option<f64>,
    pub median_slack: Option<f64>,
    #[serde(default)]
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub robrec: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            robrec: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub versions: Versions,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub xi: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub sigma_lb: f64,
    /// Largest outlier count strictly below `T`, as a percentage of `N`.
    pub regime_limit_pct: f64,
    /// Smallest swept outlier percentage with a recovery rate below one.
    pub breakdown_pct: Option<f64>,
    pub violations: usize,
    pub points: Vec<PointRecord>,
}

/// Regressors and certificate quantities shared by every sweep point.
struct Setup {
    x: DMatrix<f64>,
    xi: f64,
    t: f64,
    sigma: f64,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let gen = gen_regressors(&cfg.generator)?;
        if gen.degenerate {
            return Err(Error::Rank(format!(
                "generator produced an all-zero regressor matrix for {:?}",
                cfg.generator
            )));
        }
        let x = if cfg.normalize {
            normalize_regressors(&gen.x)?
        } else {
            gen.x
        };
        let xi = xi_amplitude(&x)?.xi;
        let t = recovery_threshold(xi)?;
        let sigma = sigma_lower_bound_for(&x, &cfg.loss, cfg.m);
        if !(sigma > 0.0) {
            return Err(Error::Rank("regressor Gram matrix is singular".into()));
        }
        Ok(Setup { x, xi, t, sigma })
    }

    fn big_n(&self) -> usize {
        self.x.ncols()
    }

    fn bound(&self, outliers: usize) -> BoundValue {
        let big_n = self.big_n();
        crate::certificates::error_bound(big_n - outliers, big_n, self.t, self.sigma)
            .unwrap_or(BoundValue::Unstable)
    }

    fn point(&self, outliers: usize) -> PointRecord {
        let b = self.bound(outliers);
        PointRecord {
            outlier_pct: 100.0 * outliers as f64 / self.big_n() as f64,
            outliers,
            bound: b.finite(),
            regime: b.regime(),
            mean_error: None,
            max_error: None,
            recovery_rate: None,
            xi: self.xi,
            t: self.t,
            sigma_lb: self.sigma,
            violations: 0,
            min_slack: None,
            median_slack: None,
            trials: Vec::new(),
        }
    }

    fn report(&self, kind: ExperimentKind, cfg: &ExperimentConfig, points: Vec<PointRecord>) -> ExperimentReport {
        let big_n = self.big_n();
        let breakdown_pct = points
            .iter()
            .filter(|p| p.recovery_rate.is_some_and(|r| r < 1.0))
            .map(|p| p.outlier_pct)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            kind,
            config: cfg.clone(),
            versions: Versions::default(),
            big_n,
            n: self.x.nrows(),
            xi: self.xi,
            t: self.t,
            sigma_lb: self.sigma,
            regime_limit_pct: 100.0 * correctable_count(self.t) as f64 / big_n as f64,
            breakdown_pct,
            violations: points.iter().map(|p| p.violations).sum(),
            points,
        }
    }
}

/// Error gain at every outlier count inside the stability regime.
pub fn run_bound_curve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let setup = Setup::new(cfg)?;
    let limit = correctable_count(setup.t).min(setup.big_n());
    let points = (0..=limit).map(|d| setup.point(d)).collect();
    Ok(setup.report(ExperimentKind::BoundCurve, cfg, points))
}

/// Per-trial seed: the sweep seed combined with the trial index.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base ^ trial as u64
}

struct TrialOutcome {
    record: TrialRecord,
}

fn run_trial(
    setup: &Setup,
    cfg: &ExperimentConfig,
    noise: &NoiseSpec,
    trial: usize,
    check_stability: bool,
) -> Result<TrialOutcome> {
    let seed = trial_seed(noise.seed, trial);
    let a0 = ground_truth_matrix(cfg.m, setup.x.nrows(), seed)?;
    let data = inject_noise(&setup.x, &a0, &NoiseSpec { seed, ..*noise })?;
    let d = Dataset::new(data.y.clone(), setup.x.clone())?;
    let opts = SolverOpts {
        seed,
        check_uniqueness: false,
        ..cfg.solver.clone()
    };
    let res = solve_regression(&d, &cfg.loss, &opts)?;
    let error = spectral_norm(&(&res.a_star - &a0));

    let mut bound = None;
    let mut violated = false;
    if check_stability && (data.sc.len() as f64) < setup.t {
        let e_s0 = select_columns(&data.e, data.s0.as_slice());
        let ell = eval_ell(&cfg.loss, &e_s0)?;
        let card = eps_violation_set(&cfg.loss, &e_s0).len();
        let gamma = gamma_lower_bound(data.sc.len(), setup.t, setup.sigma)?;
        let rhs = stability_bound_general(ell, card, cfg.loss.eps0, gamma)? + STABILITY_SLACK;
        violated = !(error <= rhs);
        bound = Some(rhs);
    }
    Ok(TrialOutcome {
        record: TrialRecord {
            trial,
            seed,
            error,
            converged: res.converged,
            bound,
            violated,
        },
    })
}

fn run_sweep(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport> {
    let setup = Setup::new(cfg)?;
    let stability = kind == ExperimentKind::Stability;
    let mut points = Vec::with_capacity(cfg.sweep.len());
    for noise in &cfg.sweep {
        let outliers = noise.outlier_count(setup.big_n());
        let mut point = setup.point(outliers);
        let mut trials: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|k| run_trial(&setup, cfg, noise, k, stability).map(|o| o.record))
            .collect::<Result<_>>()?;
        trials.sort_by_key(|t| t.trial);

        let errors: Vec<f64> = trials.iter().map(|t| t.error).collect();
        point.mean_error = Some(errors.iter().sum::<f64>() / errors.len() as f64);
        point.max_error = Some(errors.iter().cloned().fold(0.0, f64::max));
        let recovered = errors.iter().filter(|&&e| e < cfg.recovery_tol).count();
        point.recovery_rate = Some(recovered as f64 / errors.len() as f64);
        point.violations = trials.iter().filter(|t| t.violated).count();
        let mut slack: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.bound.filter(|_| t.error > 0.0).map(|b| b / t.error))
            .collect();
        slack.sort_by(f64::total_cmp);
        point.min_slack = slack.first().copied();
        point.median_slack = slack.get(slack.len() / 2).copied();
        point.trials = trials;
        points.push(point);
    }
    Ok(setup.report(kind, cfg, points))
}

/// Exact-recovery sweep without dense noise.
pub fn run_recovery_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.sweep.iter().any(|s| s.dense_bound != 0.0) {
        return Err(Error::InvalidArgument(
            "recovery experiments require dense_bound = 0 at every sweep point".into(),
        ));
    }
    run_sweep(cfg, ExperimentKind::Recovery)
}

/// Checks the error bound on every trial inside the stability regime.
pub fn run_stability_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_sweep(cfg, ExperimentKind::Stability)
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match kind {
        ExperimentKind::BoundCurve => run_bound_curve(cfg),
        ExperimentKind::Recovery => run_recovery_experiment(cfg),
        ExperimentKind::Stability => run_stability_experiment(cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format '{other}' (expected json or csv)"
            ))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV rendering with the fixed header [`CSV_HEADER`]; missing values are
/// empty fields.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in &report.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.outlier_pct,
            opt(p.bound),
            opt(p.mean_error),
            opt(p.max_error),
            opt(p.recovery_rate),
            p.xi,
            p.t,
            p.sigma_lb
        ));
    }
    out
}

pub fn emit_report(report: &ExperimentReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)? + "\n",
        ReportFormat::Csv => report_csv(report),
    };
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
