use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}, line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("sample {sample_id}: inserted run of {len} tokens exceeds the append limit of {a_max}")]
    AppendTooLong {
        sample_id: usize,
        len: usize,
        a_max: usize,
    },

    #[error("{what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{what} hash mismatch: expected {expected:016x}, found {found:016x}")]
    HashMismatch {
        what: &'static str,
        expected: u64,
        found: u64,
    },

    #[error("slot 0 only accepts $KEEP or $APPEND, found {0}")]
    IllegalStartTag(String),

    #[error("unknown tag rendering {0:?}")]
    UnknownTag(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal validation failed with {count} violation(s); first: {first}")]
    Validation { count: usize, first: String },

    #[error("sample {sample_id} has no full teacher distribution (required for distillation)")]
    MissingFullDist { sample_id: usize },

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }
}
