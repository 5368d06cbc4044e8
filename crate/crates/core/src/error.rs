use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its invariant.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested target cannot be reached by the model.
    #[error("out of range: {0}")]
    Range(String),

    /// Simulation or solver setup is inconsistent (e.g. step size too coarse).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An iterative solver failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input data is malformed or unusable.
    #[error("data error: {0}")]
    Data(String),

    /// The least-squares problem is rank deficient.
    #[error("rank deficient fit: {0}")]
    Rank(String),

    /// Config file parse or validation failure; lists every problem found.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 2 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(field: &str, value: f64) -> Result<()> {
    if value.is_nan() || value <= 0.0 {
        return Err(Error::validation(field, format!("must be > 0, got {value}")));
    }
    Ok(())
}

pub(crate) fn require_non_negative(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::validation(field, format!("must be >= 0, got {value}")));
    }
    Ok(())
}
