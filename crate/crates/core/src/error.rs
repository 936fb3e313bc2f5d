use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures from the scoring API client and its cache.
#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("request failed after {attempts} attempt(s): {message}")]
    Retryable { attempts: u32, message: String },
    #[error("HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed API response: {0}")]
    Protocol(String),
    #[error("replay mode: no cached response for text hash {0}")]
    CacheMiss(String),
    #[error("API key is not set (expected in ${0})")]
    MissingKey(String),
    #[error("no HTTP transport compiled in (enable the `http` feature)")]
    NoTransport,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` has no label")]
    MissingLabel(String),
    #[error("corpus has no toxic documents to undersample against")]
    EmptyMinority,
    #[error("class {class} has {available} document(s), need at least {required}")]
    InsufficientClass {
        class: &'static str,
        available: usize,
        required: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lexicon `{lexicon}`: {message}")]
    Lexicon { lexicon: String, message: String },
    #[error("dictionary has no in-vocabulary words ({oov} out-of-vocabulary)")]
    EmptyDictionary { oov: usize },
    #[error("no baseline provider could score document `{0}`")]
    MissingBaseline(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("non-finite value in column {column} (row {row})")]
    NonFinite { column: usize, row: usize },
    #[error("dimension mismatch: expected {expected} column(s), got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0}")]
    Misaligned(String),
    #[error("document `{id}`: {source}")]
    Document {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{count} document(s) failed: {ids:?}; first error: {first}")]
    Batch {
        count: usize,
        ids: Vec<String>,
        first: Box<Error>,
    },
    #[error("unsupported model format version {0}")]
    ModelVersion(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// True when the failure came from the scoring API or its cache.
    pub fn is_provider(&self) -> bool {
        match self {
            Error::Provider(_) | Error::MissingBaseline(_) => true,
            Error::Document { source, .. } => source.is_provider(),
            Error::Batch { first, .. } => first.is_provider(),
            _ => false,
        }
    }
}
