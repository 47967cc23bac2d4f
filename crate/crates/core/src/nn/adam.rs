use serde::{Deserialize, Serialize};

use super::tensor::{ParamStore, Tensor};
use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.995,
            eps: 2e-6,
            max_grad_norm: Some(5.0),
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || store.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }
    norm
}

/// One bias-corrected Adam update. Gradients are clipped in place first.
/// Returns the unclipped global gradient norm.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &mut [Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<f64> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(NnError::ShapeMismatch {
            op: "adam_step",
            lhs: vec![store.len()],
            rhs: vec![grads.len()],
        });
    }
    for (i, (g, p)) in grads.iter().zip(store.tensors()).enumerate() {
        if g.shape() != p.shape() {
            return Err(NnError::ShapeMismatch {
                op: "adam_step",
                lhs: p.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        if !g.all_finite() {
            return Err(NnError::NonFiniteGradient(store.name(super::ParamId(i)).to_string()));
        }
    }
    let norm = match cfg.max_grad_norm {
        Some(max) => clip_global_norm(grads, max),
        None => global_norm(grads),
    };
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in store
        .tensors_mut()
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let p = p.data_mut();
        let (m, v) = (m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m[i] / bc1;
            let vh = v[i] / bc2;
            p[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(norm)
}
