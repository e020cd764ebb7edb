//! Dense tensors, a reverse-mode gradient tape, rectifier MLPs and Adam.

mod adam;
pub mod checkpoint;
mod mlp;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{Dense, Forward, MlpModel};
pub use tape::{ElementwiseFn, Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward root must be a scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("variable does not belong to this tape")]
    ForeignVar,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid optimizer settings: {0}")]
    InvalidOptimizer(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
