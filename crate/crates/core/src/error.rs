use thiserror::Error;

/// Errors surfaced by engine operations.
///
/// `Argument` covers precondition violations (dimension mismatches, bad
/// degrees, malformed input). `Resource` is returned when a computation
/// would exceed a configured truncation bound; callers can retry with
/// larger bounds. `MaurerCartan` is a refusal to twist by an element whose
/// Maurer-Cartan residual is nonzero.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("resource bound exceeded: {0}")]
    Resource(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("Maurer-Cartan check failed: {0}")]
    MaurerCartan(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EngineError>;

impl EngineError {
    pub fn argument(msg: impl Into<String>) -> Self {
        EngineError::Argument(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        EngineError::Resource(msg.into())
    }
}
