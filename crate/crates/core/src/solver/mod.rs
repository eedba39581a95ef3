//! Solvers: the robust estimator, its proximal building block and a dense
//! simplex method used for exact reformulations.

pub mod admm;
mod crossover;
pub mod lad;
pub mod lp;
pub mod prox;

pub use admm::{check_regressor_rank, solve_regression, EstimatorResult, IterRecord, SolverOpts};
pub use lad::{lad_lp, LadSolution};
pub use lp::{solve_lp, solve_lp_with, LinearProgram, LpOptions, LpSolution, LpStatus};
pub use prox::prox_column_loss;
