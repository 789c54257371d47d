use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("attention over zero unmasked positions")]
    EmptyAttention,

    #[error("attention masks differ between fused weight vectors")]
    MaskMismatch,

    #[error("label index {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("loss node must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("forward pass is not deterministic: {first} != {second}")]
    NonDeterministic { first: f64, second: f64 },

    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("tagging failed for record `{id}`: {reason}")]
    Tagging { id: String, reason: String },

    #[error("record `{0}` has no cardinal pattern")]
    NoCardinal(String),

    #[error("record `{0}` has no active cardinal index")]
    NoActiveCardinal(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty sequence")]
    EmptySequence,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    EmbeddingDim { expected: usize, found: usize },

    #[error("{}, line {line}: {reason}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("record `{0}` not found")]
    RecordNotFound(String),

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
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by input data rather than by the program or the caller.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Tagging { .. }
                | Error::NoCardinal(_)
                | Error::EmptyCorpus
                | Error::EmbeddingDim { .. }
                | Error::Malformed { .. }
                | Error::UndefinedAuc
                | Error::NonFiniteLoss { .. }
                | Error::Checkpoint(_)
                | Error::RecordNotFound(_)
                | Error::Io { .. }
                | Error::Json(_)
                | Error::EmptyInput(_)
        )
    }
}
