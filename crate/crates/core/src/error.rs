use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlhfError>;

#[derive(Debug, Error)]
pub enum GlhfError {
    /// A parameter or configuration value is out of its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A geometric or temporal precondition of a diagnostic does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The tridiagonal solver met a matrix it refuses to factor.
    #[error("tridiagonal solve failed at row {row}: {reason}")]
    Tridiagonal { row: usize, reason: String },

    /// The time integration produced a non-finite value or an inner solve failed.
    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: usize, reason: String },

    /// Degenerate measurement (e.g. zero denominator with positive numerator).
    #[error("degenerate measurement: {0}")]
    Degenerate(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Corrupt or truncated trajectory dump.
    #[error("corrupt dump at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl GlhfError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GlhfError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GlhfError::Numerical { .. } | GlhfError::Tridiagonal { .. } | GlhfError::Degenerate(_)
        )
    }
}
