//! Graph attention policy over local swarm graphs.
//!
//! Every node carries a feature of scalar and 3-vector channels attached to
//! its pose. In equivariant mode each node update is computed in the
//! updating node's own frame: neighbor features and relative geometry are
//! re-expressed there, passed through ordinary dense layers, and the vector
//! channels of the result are rotated back out. The pooled graph embedding
//! and ego state are processed the same way in the ego frame, so the trunk
//! output transforms with the ego pose. A final dense projection maps the
//! world-frame trunk output to the Gaussian action mean.
//!
//! With `equivariant = false` every frame is the identity, which turns the
//! same network into an ordinary graph transformer on world coordinates.

mod batch;
mod encode;
mod io;
mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::GraphBatch;
pub use encode::{canonical_vectors, encode_node, node_invariants, CANONICAL_VECTORS, INVARIANTS};
pub use io::{load_policy, save_policy, sidecar_path};
pub use model::{Evaluation, Policy, PolicyOutput, ACTION_DIM};

use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphormerConfig {
    pub layers: usize,
    /// Scalar channels per node feature.
    pub scalars: usize,
    /// 3-vector channels per node feature.
    pub vectors: usize,
    pub heads: usize,
    /// Query/key width per head.
    pub key_dim: usize,
    /// Hidden width of the per-node feedforward network.
    pub ff_hidden: usize,
    pub layer_norm: bool,
    pub layer_norm_eps: f64,
    /// Divide attention logits by `sqrt(key_dim)`.
    pub scaled_attention: bool,
    pub equivariant: bool,
    /// Trunk widths: ego encoder `[a, b]`, then `[c, d]` after the pooled
    /// embedding is appended.
    pub trunk: [usize; 4],
    /// Scalar channels of the trunk output; the remaining `trunk[3] −
    /// out_scalars` entries form `out_vectors` 3-vectors.
    pub out_scalars: usize,
    pub head_hidden: usize,
    pub critic_hidden: usize,
    pub log_std_init: f64,
    /// Initial bias of the action mean (raw units, before normalization).
    pub mean_bias_init: f64,
    /// Initialization gain of the action-mean output layer.
    pub mean_gain: f64,
}

impl Default for GraphormerConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            scalars: 60,
            vectors: 60,
            heads: 1,
            key_dim: 60,
            ff_hidden: 240,
            layer_norm: true,
            layer_norm_eps: 1e-5,
            scaled_attention: true,
            equivariant: true,
            trunk: [256, 128, 256, 256],
            out_scalars: 64,
            head_hidden: 256,
            critic_hidden: 256,
            log_std_init: 0.5f64.ln(),
            mean_bias_init: 0.0,
            mean_gain: 0.01,
        }
    }
}

impl GraphormerConfig {
    /// Node feature width `scalars + 3·vectors`.
    pub fn feature_width(&self) -> usize {
        self.scalars + 3 * self.vectors
    }

    pub fn out_vectors(&self) -> usize {
        (self.trunk[3] - self.out_scalars) / 3
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("layers", self.layers),
            ("heads", self.heads),
            ("key_dim", self.key_dim),
            ("ff_hidden", self.ff_hidden),
            ("head_hidden", self.head_hidden),
            ("critic_hidden", self.critic_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("policy.{name} must be positive"));
            }
        }
        if self.feature_width() == 0 {
            return Err("policy.scalars and policy.vectors cannot both be zero".into());
        }
        if self.trunk.contains(&0) {
            return Err("policy.trunk widths must be positive".into());
        }
        if self.out_scalars == 0 || self.out_scalars > self.trunk[3] || (self.trunk[3] - self.out_scalars) % 3 != 0 {
            return Err(format!(
                "policy.out_scalars = {} must be positive and leave a multiple of 3 in trunk[3] = {}",
                self.out_scalars, self.trunk[3]
            ));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err("policy.layer_norm_eps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("local graph has no nodes")]
    EmptyGraph,
    #[error("invalid policy config: {0}")]
    Config(String),
    #[error("policy sidecar: {0}")]
    Sidecar(String),
}

pub type Result<T, E = PolicyError> = std::result::Result<T, E>;
