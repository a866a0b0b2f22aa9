use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value while evaluating {0}")]
    NumericDomain(String),

    #[error("trajectory left the validity box at t = {time} (point {point:?})")]
    DomainExit { time: f64, point: Vec<f64> },

    #[error("flow word left its domain in letter {letter}: {source}")]
    WordDomain {
        letter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("representation error: {0}")]
    Representation(String),

    #[error("unsupported isotropy: {0}")]
    UnsupportedIsotropy(String),

    #[error("splitting failure: {0}")]
    SplittingFailure(String),

    #[error("Newton iteration left its basin after {iterations} iterations (residual {residual:e})")]
    BasinExceeded { iterations: usize, residual: f64 },

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
