use thiserror::Error;

/// Errors produced by the tensor, TT and training routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("split {split} out of range for order-{order} tensor")]
    SplitOutOfRange { split: usize, order: usize },

    #[error("index {index:?} out of range for shape {shape:?}")]
    IndexOutOfRange { index: Vec<usize>, shape: Vec<usize> },

    #[error("invalid ranks: {0}")]
    InvalidRanks(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("dataset error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
