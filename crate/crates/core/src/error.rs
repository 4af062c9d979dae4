use std::path::PathBuf;

use thiserror::Error;

use crate::roles::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),

    #[error("unknown doc_id {0:?}")]
    UnknownDocId(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty query after tokenization")]
    EmptyQuery,

    #[error("no ranking for question {0:?}")]
    MissingQuestion(String),

    #[error("no candidates to rerank")]
    NoCandidates,

    #[error("{stage} stage failed: {reason}")]
    Stage { stage: &'static str, reason: String },

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { what, reason: reason.into() }
    }

    pub(crate) fn stage(stage: &'static str, reason: impl Into<String>) -> Self {
        Error::Stage { stage, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
