//! A small dense reverse-mode autodiff engine.
//!
//! Values live on a [`Tape`] as row-major 2-D blocks. Every primitive records
//! its parents so [`Tape::backward`] can replay the adjoints in reverse
//! execution order. Parameters are held in a [`ParamStore`] and loaded onto a
//! fresh tape for each forward pass.

mod adam;
mod checkpoint;
mod init;
mod layers;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, clip_global_norm, global_norm, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, DType};
pub use init::xavier_uniform;
pub use layers::{Linear, Mlp};
pub use tape::{Gradients, ParamVars, Tape, Var};
pub use tensor::{ParamId, ParamStore, Tensor};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tape was already consumed by a backward pass")]
    TapeExhausted,
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("{0}")]
    Invalid(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
