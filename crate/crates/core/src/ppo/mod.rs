//! Clipped PPO with synchronous multi-worker rollouts and GAE.

mod buffer;
mod gae;
mod rollout;
mod trainer;
mod update;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{AdamConfig, NnError};
use crate::policy::PolicyError;
use crate::swarm::EnvError;

pub use buffer::{normalize_advantages, RolloutBuffer};
pub use gae::gae;
pub use rollout::{collect, evaluate_policy, trace_episode, Worker};
pub use trainer::{checkpoint_path, TrainSummary, Trainer, UpdateRecord};
pub use update::{gaussian_entropy, gaussian_log_prob, policy_heads, ppo_update, surrogate_loss, ActorCritic, Heads, LossOutput, UpdateStats};

#[derive(Debug, Error)]
pub enum PpoError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("sequence lengths differ: {rewards} rewards, {values} values, {dones} done flags")]
    LengthMismatch { rewards: usize, values: usize, dones: usize },
    #[error("rollout buffer is not full ({filled} of {capacity} steps)")]
    BufferNotFull { filled: usize, capacity: usize },
    #[error("non-finite {0}; update aborted")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = PpoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Control steps per worker between updates.
    pub rollout: usize,
    /// Transitions per SGD minibatch.
    pub batch_size: usize,
    pub epochs: usize,
    pub max_grad_norm: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub workers: usize,
    /// Agent transitions to collect before stopping.
    pub total_steps: u64,
    pub seed: u64,
    /// Transitions per gradient chunk. Chunks are evaluated in parallel and
    /// summed in index order, so results do not depend on thread count.
    pub grad_chunk: usize,
    /// Updates between checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.003,
            rollout: 128,
            batch_size: 4096,
            epochs: 5,
            max_grad_norm: 5.0,
            adam_beta1: 0.9,
            adam_beta2: 0.995,
            adam_eps: 2e-6,
            workers: 4,
            total_steps: 1_000_000,
            seed: 0,
            grad_chunk: 256,
            checkpoint_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            max_grad_norm: Some(self.max_grad_norm),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("gamma", self.gamma),
            ("gae_lambda", self.gae_lambda),
            ("clip_ratio", self.clip_ratio),
            ("max_grad_norm", self.max_grad_norm),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PpoError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda), ("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(PpoError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [("value_coef", self.value_coef), ("entropy_coef", self.entropy_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PpoError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        let counts = [
            ("rollout", self.rollout),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("workers", self.workers),
            ("grad_chunk", self.grad_chunk),
            ("checkpoint_every", self.checkpoint_every),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(PpoError::Config(format!("{name} must be positive")));
            }
        }
        if self.total_steps == 0 {
            return Err(PpoError::Config("total_steps must be positive".into()));
        }
        Ok(())
    }
}
