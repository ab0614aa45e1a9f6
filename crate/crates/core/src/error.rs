use thiserror::Error;

/// Errors produced anywhere in the lab.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// usage/config problems, data problems, and numeric failures.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("query generation failed after {retries} retries: {reason}")]
    Generation { retries: usize, reason: String },

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Carries the parameters from the last step whose update stayed finite.
    #[error("training diverged at step {step}: {reason}")]
    Diverged {
        step: usize,
        reason: String,
        last_good: Option<Box<crate::policy::Checkpoint>>,
    },

    #[error("parse error in {source_name} line {line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } | LabError::Usage(_) => 1,
            LabError::Numeric(_) | LabError::Diverged { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
