use thiserror::Error;

use crate::galois::FieldError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{what} {value} out of range {min}..={max}")]
    IndexOutOfRange {
        what: &'static str,
        value: u64,
        min: u64,
        max: u64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("even-characteristic only: phi is defined for p = 2, got p = {0}")]
    EvenCharacteristicOnly(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("reconcile called on a message-mode run")]
    NotControlRun,
    #[error("unknown eavesdropping strategy {0:?}")]
    UnknownStrategy(String),
    #[error("degenerate QDC parameters: c = 1 and P_E = 0 leave the series undefined")]
    DegenerateSeries,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
