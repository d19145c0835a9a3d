use crate::labeled::Label;

/// Errors raised by the filter, fusion and simulation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("max-mixture has no components")]
    EmptyMixture,

    #[error("invalid weight {0}")]
    InvalidWeight(f64),

    #[error("duplicate label {0}")]
    DuplicateLabel(Label),

    #[error("update degenerated: no hypothesis kept a positive weight")]
    DegenerateUpdate,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
