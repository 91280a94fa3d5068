use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing ' ||| ' delimiter")]
    MissingDelimiter,
    #[error("{0} side of bitext has no tokens")]
    EmptySide(&'static str),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unknown BIO label {0:?}")]
    UnknownLabel(String),
    #[error("vector for {token:?} has {found} values, expected {expected}")]
    DimensionMismatch {
        token: String,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric value {0:?}")]
    NonNumericValue(String),
    #[error("empty file")]
    EmptyFile,
    #[error("malformed alignment link {0:?}")]
    MalformedLink(String),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("link {source_index}-{target_index} out of range for {m}x{n} bitext")]
    LinkOutOfRange {
        source_index: usize,
        target_index: usize,
        m: usize,
        n: usize,
    },
    #[error("span surface {found:?} does not match tokens {expected:?}")]
    SurfaceMismatch { expected: String, found: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty string")]
    EmptyString,
    #[error("unknown sentence id {0}")]
    UnknownSentence(u64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}:{line}: {source}", path.display())]
    At {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a file and 1-based line number.
    pub fn at(self, path: impl Into<PathBuf>, line: usize) -> Error {
        Error::At {
            path: path.into(),
            line,
            source: Box::new(self),
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::At { source, .. } | Error::File { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
