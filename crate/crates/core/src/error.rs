use thiserror::Error;

/// Errors surfaced by design construction, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("enumeration too large: {count} supports exceeds cap {cap}")]
    EnumerationCap { count: f64, cap: f64 },

    #[error("solver diverged: objective {objective:e} exceeded {limit:e}")]
    Diverged { objective: f64, limit: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("i/o error at {path}: {source}")]
    IoAt { path: std::path::PathBuf, source: std::io::Error },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::IoAt { path: path.to_path_buf(), source }
}
