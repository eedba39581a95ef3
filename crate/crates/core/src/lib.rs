//! Robust multi-output regression `min_A phi(Y - A X)` with column-wise
//! summable losses, together with computable certificates of exact recovery
//! and error bounds, synthetic data generators and an experiment runner.
//!
//! ```
//! use nalgebra::dmatrix;
//! use robrec::{solve_regression, Dataset, InnerNorm, LossSpec, SolverOpts};
//!
//! let d = Dataset::new(dmatrix![1.0, 2.0, 10.0], dmatrix![1.0, 1.0, 1.0]).unwrap();
//! let spec = LossSpec::new(InnerNorm::L1, 0.0).unwrap();
//! let fit = solve_regression(&d, &spec, &SolverOpts::default()).unwrap();
//! assert!((fit.a_star[(0, 0)] - 2.0).abs() < 1e-8);
//! ```

pub mod certificates;
pub mod data;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod linalg;
pub mod loss;
pub mod solver;

pub use certificates::{
    error_bound, gamma_lower_bound, general_recovery_check, pi_c_bruteforce, ratio_condition_oracle,
    recovery_threshold, sigma_grid_estimate, sigma_lower_bound, stability_bound_general, xi_amplitude,
    BoundValue, Certificate, Regime,
};
pub use data::{
    hankel_regressors, load_dataset, normalize_columns, normalize_regressors, partition_outliers,
    save_dataset, Dataset, DatasetFormat, GroundTruth, IndexSet,
};
pub use error::{Error, Result};
pub use experiment::{
    emit_report, run_bound_curve, run_experiment, run_recovery_experiment, run_stability_experiment,
    ExperimentConfig, ExperimentKind, ExperimentReport, ReportFormat,
};
pub use generators::{gen_regressors, ground_truth_matrix, inject_noise, GeneratorKind, GeneratorSpec, NoiseSpec};
pub use loss::{check_p_properties, eps_violation_set, eval_ell, eval_phi, InnerNorm, LossSpec, PropertyReport};
pub use solver::{lad_lp, solve_lp, solve_regression, EstimatorResult, LinearProgram, LpSolution, LpStatus, SolverOpts};
pub use nalgebra;
