use std::path::PathBuf;

/// Errors produced by the simulation and analysis modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampling bound violated: {0}")]
    Sampling(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("estimator undefined: {0}")]
    Estimator(String),

    #[error("profile analysis failed: {0}")]
    Analysis(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("cannot read {path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
