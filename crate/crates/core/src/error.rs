use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter inequality does not hold; the message names it.
    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The request is outside what the exhaustive algorithms can handle.
    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("no complementary pushing pair found for q = {q:?}")]
    Infeasible { q: Vec<f64> },

    #[error("numeric failure at step {step}: {msg}")]
    Numeric { step: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
