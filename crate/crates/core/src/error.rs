use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input is not valid UTF-8 (first bad byte at offset {offset})")]
    InvalidEncoding { offset: usize },

    #[error("trailing lone backslash at byte offset {offset}")]
    UnterminatedCommand { offset: usize },

    #[error("classification table: {0}")]
    InvalidTable(String),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("duplicate page id `{0}`")]
    DuplicatePageId(String),

    #[error("duplicate query id `{0}`")]
    DuplicateQueryId(String),

    #[error("unsupported or missing file header: expected `{expected}`")]
    BadHeader { expected: &'static str },

    #[error("vocabulary is empty after applying min_count={min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no context tokens for the target position")]
    EmptyContext,

    #[error("training corpus contains no usable formulae")]
    EmptyCorpus,

    #[error("every token of the formula is out of vocabulary")]
    UnknownTokensOnly,

    #[error("model was trained in {actual} mode, {expected} mode required")]
    WrongMode {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("unknown surface `{0}`")]
    UnknownSurface(String),

    #[error("need at least {needed} rows, have {available}")]
    InsufficientRows { needed: usize, available: usize },

    #[error("query has no formulae to match")]
    NoQueryFormulae,

    #[error("ranking method {method} needs {needs}")]
    MethodUnavailable { method: &'static str, needs: &'static str },

    #[error("unknown page `{0}`")]
    UnknownPage(String),

    #[error("alpha must be a non-negative number, got {0}")]
    NegativeAlpha(f64),

    #[error("malformed run line {line}: {reason}")]
    MalformedRunLine { line: usize, reason: String },

    #[error("malformed qrels line {line}: {reason}")]
    MalformedQrelLine { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
