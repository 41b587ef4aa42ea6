//! Error type shared by every module, with the exit-code mapping used by the CLI.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("step size too large: dt*kappa = {product:.3e} exceeds {limit}")]
    StepSize { product: f64, limit: f64 },

    #[error("oracle truncation: population {population:.3e} in the top state of cutoff {cutoff}")]
    Truncation { population: f64, cutoff: usize },

    #[error("calibration failed: {reason}")]
    Calibration {
        reason: String,
        /// Sampled (kappa, efficiency) pairs for diagnosis.
        curve: Vec<(f64, f64)>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Output(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for validation errors (bad input), 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config { .. } | Error::Contract(_) => 1,
            _ => 2,
        }
    }
}
