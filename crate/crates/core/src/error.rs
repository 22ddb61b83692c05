use std::io;

use thiserror::Error;

use crate::linsolve::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image size {n}: {reason}")]
    InvalidSize { n: usize, reason: &'static str },

    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed PGM ({field}): {message}")]
    Format { field: &'static str, message: String },

    #[error("operation requires the circulant difference variant")]
    UnsupportedVariant,

    #[error("nu estimation failed: {0}")]
    Estimation(String),

    #[error("linear solve did not converge at iteration {iteration} ({report})")]
    SolveFailed { iteration: usize, report: SolveReport },

    #[error("iterates became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Shape {
                what,
                expected,
                actual,
            })
        }
    }
}
