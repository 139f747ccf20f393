use thiserror::Error;

use crate::qpsolve::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("solver finished with status {0:?}")]
    Solver(SolveStatus),

    #[error("every one of the {0} relaxation trials failed to reach an optimum")]
    AllTrialsFailed(usize),

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("IDX: bad magic bytes {0:02x?}")]
    IdxBadMagic([u8; 2]),

    #[error("IDX: unknown element type code 0x{0:02x}")]
    IdxUnknownElement(u8),

    #[error("IDX: truncated input, expected {expected} bytes but found {found}")]
    IdxTruncated { expected: usize, found: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
