use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op}: value {value} outside the valid domain")]
    Domain { op: &'static str, value: f64 },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("parameter {index} has no gradient")]
    MissingGradient { index: usize },
    #[error("non-finite loss in {stage} at epoch {epoch}: {value}")]
    NonFinite {
        stage: &'static str,
        epoch: usize,
        value: f64,
    },
    #[error("dimension mismatch: expected input_dim {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("dataset: {0}")]
    Data(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
