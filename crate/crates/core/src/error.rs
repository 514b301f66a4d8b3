//! Error types shared across the processing chain.

use thiserror::Error;

/// Errors raised by construction, processing, and I/O operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Array or grid dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Spectral moments requested on a gate with zero total power.
    #[error("Doppler moments undefined: total power is zero at this gate")]
    MomentUndefined,

    /// Least-squares fit has no unique solution (e.g. all abscissae equal).
    #[error("fit is singular: {0}")]
    FitSingular(String),

    /// A file does not conform to its documented format.
    #[error("format violation in {path}: {reason}")]
    FormatViolation { path: String, reason: String },

    /// A text record failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Convenience constructor for [`Error::InvalidArgument`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Convenience constructor for [`Error::DimensionMismatch`].
    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
