use thiserror::Error;

/// Errors raised by the library.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// invalid input (`Parse`, `Shape`, `InvalidArgument`, `Io`, `Json`),
/// numerical failure (`Rank`, `Numerical`, `Lp`) and regime violations
/// (`UnstableRegime`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rank deficiency: {0}")]
    Rank(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("outside stability regime: {0}")]
    UnstableRegime(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad user input or configuration.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Json(_)
                | Error::Parse { .. }
                | Error::Shape(_)
                | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
