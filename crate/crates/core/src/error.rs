use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid q: {0}")]
    InvalidQ(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{what} exceeds the enumeration budget ({got} > {limit})")]
    Budget {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("permutation moves position {position}, outside the supplied prefix of length {prefix}")]
    OutsidePrefix { position: usize, prefix: usize },

    #[error("independent computations disagree: {0}")]
    OracleMismatch(String),

    #[error("truncation needs at least {needed} letters, got {got}")]
    NeedsMoreSamples { needed: usize, got: usize },

    #[error("inverse transform did not terminate within {0} iterations")]
    IterationCap(usize),

    #[error("distributions have different supports")]
    SupportMismatch,

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
