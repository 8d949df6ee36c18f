use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    /// Stable process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Invariant(_) => 1,
            SimError::Config(_) | SimError::Domain(_) => 2,
            SimError::Io(_) | SimError::Parse(_) => 3,
        }
    }
}
