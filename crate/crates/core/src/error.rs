use thiserror::Error;

/// Errors raised by the solver and its file formats.
#[derive(Debug, Error)]
pub enum PeError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular solve: {0}")]
    Singular(String),

    #[error("mode out of range: {0}")]
    ModeOutOfRange(String),

    #[error("unknown forcing spec `{0}`")]
    UnknownForcing(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("non-finite value encountered at t = {0}")]
    NonFinite(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PeError>;
