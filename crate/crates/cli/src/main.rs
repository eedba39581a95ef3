//! `robrec` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! failure, 4 bound violation detected.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "robrec", version, about = "Robust regression with exact-recovery certificates")]
struct Cli {
    /// Output format for reports and estimates
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Replaces the seeds of the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Where the regressor matrix comes from.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Regressors {
    /// Dataset: a JSON descriptor {"y": path, "x": path} or a CSV with a Y block and an X block
    #[arg(long)]
    data: Option<PathBuf>,
    /// Regressor matrix as CSV, one row per line
    #[arg(long)]
    x: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate regressors and noisy outputs and write them as CSV
    Generate {
        /// JSON with "generator", optional "noise", "m" and "normalize"
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit A by minimizing phi(Y - A X)
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// JSON with optional "loss", "solver" and "normalize"
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute xi(X), the recovery threshold and the error-bound curve
    Certify {
        #[command(flatten)]
        source: Regressors,
        /// Scale every column of X to unit Euclidean norm first
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error gain B(r, X) for a given number of outliers
    Bound {
        #[command(flatten)]
        source: Regressors,
        /// Number of gross errors N - r
        #[arg(long)]
        outliers: usize,
        /// Conditioning constant to use instead of the eigenvalue estimate
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        normalize: bool,
    },
    /// Run an experiment sweep described by a JSON config
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentArg {
    BoundCurve,
    Recovery,
    Stability,
}

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_VIOLATION: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<robrec::Error>() {
        return if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERICAL };
    }
    if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        return EXIT_INPUT;
    }
    EXIT_NUMERICAL
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out } => commands::generate(&config, &out, cli.seed),
        Command::Estimate { data, config, out } => {
            commands::estimate(&data, config.as_deref(), out.as_deref(), cli.seed, cli.format)
        }
        Command::Certify { source, normalize, out } => commands::certify(&source, normalize, out.as_deref(), cli.format),
        Command::Bound {
            source,
            outliers,
            sigma,
            normalize,
        } => commands::bound(&source, outliers, sigma, normalize),
        Command::Experiment { kind, config, out } => {
            let kind = match kind {
                ExperimentArg::BoundCurve => robrec::ExperimentKind::BoundCurve,
                ExperimentArg::Recovery => robrec::ExperimentKind::Recovery,
                ExperimentArg::Stability => robrec::ExperimentKind::Stability,
            };
            commands::experiment(kind, &config, out.as_deref(), cli.seed, cli.format)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_family() {
        let input = anyhow::Error::from(robrec::Error::InvalidArgument("x".into()));
        let numerical = anyhow::Error::from(robrec::Error::Rank("x".into())).context("certifying");
        let io = anyhow::Error::from(std::io::Error::other("disk"));
        assert_eq!(exit_code(&input), EXIT_INPUT);
        assert_eq!(exit_code(&numerical), EXIT_NUMERICAL);
        assert_eq!(exit_code(&io), EXIT_INPUT);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
