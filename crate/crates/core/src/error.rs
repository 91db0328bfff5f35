use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("could not place {num_minima} minima with basin radius {radius} after {attempts} draws")]
    BasinSeparation {
        num_minima: usize,
        radius: f64,
        attempts: usize,
    },

    #[error("non-finite gradient at coordinate {coordinate} (step {step})")]
    NonFiniteGradient { coordinate: usize, step: usize },

    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error("training failed for latent dimension {m}: {source}")]
    Sweep {
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
