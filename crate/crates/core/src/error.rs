use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmcError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("all selection weights are zero or non-finite")]
    DegenerateWeights,

    #[error("rejection sampler did not terminate after {iterations} iterations")]
    Nontermination { iterations: u64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = SmcError> = std::result::Result<T, E>;

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SmcError::Dimension { expected, found })
    }
}
