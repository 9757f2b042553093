use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid sizes, dimensions or option values that cannot be used.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An argument outside the domain of an operation (negative order, bad ℓ, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ImmersionViolation: min speed {min_speed:e} below threshold {threshold:e}")]
    ImmersionViolation { min_speed: f64, threshold: f64 },

    #[error("GenerationFailure: {0}")]
    GenerationFailure(String),

    #[error("InnerSolveFailure: {0}")]
    InnerSolveFailure(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error is caused by malformed input rather than a violated invariant.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::GridMismatch(_) | Error::Configuration(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
