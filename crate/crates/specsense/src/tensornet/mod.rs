//! Minimal neural-network engine.
//!
//! Covers exactly what the detectors need: dense tensors, forward/backward
//! passes for conv1d / dense / time-distributed dense / LSTM / relu /
//! softmax / dropout, fused softmax cross-entropy, the Adam optimizer, a
//! finite-difference gradient checker, and a checkpoint container. One code
//! path serves both element types: f64 is the reference mode all
//! correctness tests run in, f32 the fast mode used for training.

mod adam;
mod chain;
mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod scalar;
mod tensor;

#[cfg(test)]
mod tests;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use chain::Chain;
pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry, CHECKPOINT_VERSION,
};
pub use gradcheck::{grad_check, grad_check_against, GradCheckConfig, GradCheckReport};
pub use layer::{layer_backward, layer_forward, softmax, LayerCache, LayerSpec, Mode, ParamSet};
pub use loss::softmax_cross_entropy;
pub use scalar::Scalar;
pub use tensor::{axpy, dot, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
    #[error("missing parameter tensor {0}")]
    MissingParam(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("cache does not match the layer it was produced by")]
    CacheMismatch,
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
