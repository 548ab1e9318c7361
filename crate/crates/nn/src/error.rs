use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {layer}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        layer: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("kernel size {kernel} exceeds time length {time}")]
    KernelTooLarge { kernel: usize, time: usize },

    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),

    #[error("non-finite value in {layer} during {stage}")]
    NonFinite { layer: String, stage: &'static str },

    #[error("{layer} has no cached forward pass; call forward_train first")]
    NoCache { layer: String },

    #[error("corrupt parameter section: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
