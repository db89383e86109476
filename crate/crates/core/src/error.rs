use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("SVD failed to converge after {sweeps} sweeps")]
    NumericalFailure { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, found {found}{}", line_suffix(*.line))]
    Dimension {
        expected: usize,
        found: usize,
        line: Option<usize>,
    },

    #[error("cannot apply the ||e||-scaled removal to a zero vector")]
    ZeroVector,

    #[error("rank {requested} out of range (maximum {max})")]
    Rank { requested: usize, max: usize },

    #[error("record language {record:?} does not match basis language {basis:?}")]
    LanguageMismatch { record: String, basis: String },

    #[error("no component basis for language {0:?}")]
    MissingBasis(String),

    #[error("query {0:?} has no relevant candidates")]
    NoRelevant(String),

    #[error("labels contain a single class; both classes are required")]
    DegenerateLabels,

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("duplicate key {key:?} on line {line}")]
    DuplicateKey { key: String, line: usize },

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("file truncated: {0}")]
    TruncatedFile(String),

    #[error("corrupt component basis: max |B^T B - I| = {deviation:.3e}")]
    CorruptBasis { deviation: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(n) => format!(" on line {n}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dimension(expected: usize, found: usize) -> Self {
        Error::Dimension {
            expected,
            found,
            line: None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for convergence failures, as opposed to bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure { .. })
    }

    /// Process exit code: 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }
}
