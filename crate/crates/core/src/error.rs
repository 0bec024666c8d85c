use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration incomplete: `{0}` is required")]
    Incomplete(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("exponent region violated: {0}")]
    Region(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("kernel is singular at x = 0")]
    Singular,

    #[error("accuracy target missed: {reason} (best estimate {estimate:e} +/- {error:e})")]
    Accuracy {
        reason: String,
        estimate: f64,
        error: f64,
    },

    #[error("fit window too short: {0} points, at least 4 required")]
    FitWindow(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
