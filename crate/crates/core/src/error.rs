use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::audio_io::WavError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: {source}", path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: WavError,
    },

    /// Malformed CSV, JSON or manifest content.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    /// An argument or input violated an operation's precondition.
    #[error("{0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn precondition(message: impl Into<String>) -> Self {
        Error::Precondition(message.into())
    }
}
