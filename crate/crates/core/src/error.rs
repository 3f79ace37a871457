use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Domain(String),

    #[error("sentence {sentence_id} has no emotional token to draw")]
    EmptyImage { sentence_id: String },

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("unknown answer label {0:?}")]
    UnknownAnswer(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
