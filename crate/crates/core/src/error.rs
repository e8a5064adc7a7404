use thiserror::Error;

/// Errors raised by the numeration, chain, operator and spectral routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability {0} is outside the open interval (0, 1)")]
    InvalidProbability(f64),

    #[error("digit {digit} at index {index} is not binary")]
    InvalidDigit { index: usize, digit: u8 },

    #[error("adjacent ones at indices {index} and {}", index + 1)]
    AdjacentOnes { index: usize },

    #[error("value of {what} exceeds the 64-bit range")]
    Overflow { what: &'static str },

    #[error("no transducer path matches the word at digit {position}")]
    NoTransducerPath { position: usize },

    #[error("invalid size {size}: {reason}")]
    InvalidSize { size: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("orbit escaped at index {index}")]
    Escaped { index: usize },

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("identity inapplicable: denominator of term {index} fell below {threshold:e}")]
    IdentityInapplicable { index: usize, threshold: f64 },

    #[error("malformed export: {0}")]
    MalformedExport(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
