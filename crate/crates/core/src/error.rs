use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape mismatch: instance is {expected:?}, matching is {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("malformed program: {0}")]
    MalformedProgram(String),

    #[error("LP numerical failure: {0}")]
    Numerical(String),

    #[error("malformed network: {0}")]
    MalformedNetwork(String),

    #[error("integer overflow risk: {0}")]
    Overflow(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("search space too large: {0} candidate matchings")]
    SearchSpaceTooLarge(f64),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
