use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::ShapeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Shape(#[from] ShapeError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row of an input CSV could not be read. `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{}", match line { Some(l) => format!("line {l}: {message}"), None => message.clone() })]
    Validation { line: Option<u64>, message: String },

    #[error("feature '{0}' is constant in the fit set; cannot normalize")]
    DegenerateFeature(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Model(#[from] crate::persist::ModelError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
