use crate::autodiff::Shape;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },

    #[error("backward requires a scalar root, got {0:?}")]
    NonScalarRoot(Shape),

    #[error("non-finite value in {what}{}", coord.map(|c| format!(" at coordinate {c}")).unwrap_or_default())]
    NonFinite { what: String, coord: Option<usize> },

    #[error("field id {id} out of vocabulary (field {field}, vocab {vocab})")]
    OutOfVocab { field: usize, id: usize, vocab: usize },

    #[error("probability {0} outside (0,1)")]
    InvalidProbability(f64),

    #[error("AUC undefined: input contains a single class")]
    SingleClassAuc,

    #[error("task pool too small: {have} tasks, need {need}")]
    PoolTooSmall { have: usize, need: usize },

    #[error("online update out of order: hour {got} not after checkpoint hour {last}")]
    OutOfOrderHour { got: i64, last: i64 },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown ablation variant `{0}`")]
    UnknownVariant(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
