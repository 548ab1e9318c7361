//! Minimal numeric engine for load-forecasting networks.
//!
//! Dense, 1-D convolution, LSTM, dropout and flatten layers with
//! hand-written backward passes, mean-squared-error loss, and Adam with a
//! per-epoch exponential learning-rate decay. Everything runs in `f64` on
//! a single thread so identical seeds give bit-identical trajectories.

pub mod adam;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod io;
pub mod layers;
mod linalg;
pub mod loss;
pub mod network;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use error::{NnError, Result};
pub use layers::{Activation, Conv1d, Dense, Dropout, Flatten, Lstm};
pub use loss::mse_loss;
pub use network::{Layer, Network};
pub use tensor::{Param, Tensor};
