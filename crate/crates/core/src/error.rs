use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("topic id {id} out of range for a model with {k} topics")]
    TopicOutOfRange { id: usize, k: usize },

    #[error("{0} does not match the loaded vocabulary")]
    VocabularyMismatch(&'static str),

    #[error("fetch {url}: {message}")]
    Fetch { url: String, message: String },

    #[error("search adapter: {0}")]
    Search(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
