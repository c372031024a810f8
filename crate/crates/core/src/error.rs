use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Location and expectation of a syntax error in the Java subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: expected {}, found {}",
            self.line, self.column, self.expected, self.found
        )
    }
}

impl std::error::Error for ParseError {}

/// Which branch of a siamese comparison failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::A => f.write_str("A"),
            Side::B => f.write_str("B"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),

    #[error("method body has no statements")]
    EmptyBody,

    #[error("no method declaration found (requested index {index}, found {available})")]
    NoMethod { index: usize, available: usize },

    #[error("node kind `{kind}` is missing from the vocabulary")]
    VocabularyMiss { kind: String },

    #[error("{source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },

    #[error("need {requested} functionalities but only {available} are available")]
    InsufficientFunctionalities { requested: usize, available: usize },

    #[error("functionality {functionality} has {count} fragment(s); at least 2 are required")]
    InsufficientFragments { functionality: u64, count: usize },

    #[error("split `{split}` needs {needed} negative pairs but only {available} cross-functionality pairs exist")]
    InsufficientNegatives {
        split: String,
        needed: usize,
        available: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("text encoder failed: {0}")]
    Encoder(String),

    #[error("input {side}: {source}")]
    Side {
        side: Side,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable name used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::EmptyBody => "EmptyBody",
            Error::NoMethod { .. } => "NoMethod",
            Error::VocabularyMiss { .. } => "VocabularyMiss",
            Error::Format { .. } => "FormatError",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::InsufficientFunctionalities { .. } => "InsufficientFunctionalities",
            Error::InsufficientFragments { .. } => "InsufficientFragments",
            Error::InsufficientNegatives { .. } => "InsufficientNegatives",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Encoder(_) => "EncoderError",
            Error::Side { source, .. } => source.kind(),
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                "FileNotFound"
            }
            Error::Io { .. } => "IoError",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(context: impl Into<String>, expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
