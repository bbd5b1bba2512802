use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its valid domain.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    /// Caller-supplied input (not configuration) is out of range.
    #[error("invalid input: {0}")]
    Input(String),

    /// The requested computation is not available for the configured model.
    #[error("unsupported model: {0}")]
    ModelUnsupported(String),

    /// The observed data carry no usable likelihood over the μ support.
    #[error("degenerate evidence: {0}")]
    DegenerateEvidence(String),

    /// A click count exceeds the μ_max stability cutoff.
    #[error(
        "click count {n} exceeds the stability cutoff {max_n} for mu_max={mu_max}; \
         posteriors above the cutoff depend on mu_max and are rejected"
    )]
    Inadmissible { n: usize, max_n: usize, mu_max: usize },

    #[error("interpolation at mu={mu} lies outside the support hull [{lo}, {hi}]")]
    Extrapolation { mu: usize, lo: usize, hi: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("fingerprint mismatch: file has {found}, config has {expected}")]
    FingerprintMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Inadmissible { .. } | Error::Extrapolation { .. } => 2,
            Error::Config { .. } | Error::FingerprintMismatch { .. } | Error::Parse { .. } => 3,
            Error::Json(_) => 3,
            Error::ModelUnsupported(_) => 4,
            Error::DegenerateEvidence(_) => 5,
            Error::Io(_) => 1,
        }
    }
}
