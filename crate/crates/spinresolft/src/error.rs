use thiserror::Error;

/// Crate error type.
///
/// Numerical routines return `InvalidInput` for domain violations that a
/// caller could have checked (negative durations, populations that do not
/// sum to one) and the more specific variants for failures that only
/// surface at run time.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fit did not converge after {iterations} iterations (last cost {last_cost:.6e})")]
    FitDidNotConverge { iterations: usize, last_cost: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("linear solve failed: {0}")]
    SingularSystem(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
