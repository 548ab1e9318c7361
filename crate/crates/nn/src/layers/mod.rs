mod conv1d;
mod dense;
mod dropout;
mod flatten;
mod lstm;

pub use conv1d::Conv1d;
pub use dense::{Activation, Dense};
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use lstm::Lstm;

use crate::error::NnError;

pub(crate) fn shape_err(layer: &str, expected: &[usize], got: &[usize]) -> NnError {
    NnError::ShapeMismatch {
        layer: layer.to_string(),
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}
