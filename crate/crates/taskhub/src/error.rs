use std::io;

use thiserror::Error;

pub type Result<T, E = HubError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HubError {
    #[error("{what} {id:?} not found")]
    NotFound { what: &'static str, id: String },

    #[error("contributor {contributor} already joined task {joined_task} for this source")]
    Exclusivity { contributor: String, joined_task: String },

    #[error("invalid request: {0}")]
    Validation(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error("store corrupted at line {line}: {message}")]
    Corrupt { line: usize, message: String },

    #[error(transparent)]
    Core(#[from] privlabel_core::Error),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HubError {
    pub(crate) fn not_found(what: &'static str, id: &str) -> Self {
        HubError::NotFound {
            what,
            id: id.to_string(),
        }
    }

    /// Short machine-readable name used in wire error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            HubError::NotFound { .. } => "not_found",
            HubError::Exclusivity { .. } => "exclusivity",
            HubError::Validation(_) => "validation",
            HubError::Conflict(_) => "conflict",
            HubError::Bundle(_) => "bundle",
            HubError::Corrupt { .. } => "corrupt_store",
            HubError::Core(_) | HubError::Io(_) | HubError::Json(_) => "internal",
        }
    }
}
