use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{normalize_advantages, PpoError, Result, RolloutBuffer, TrainConfig};
use crate::nn::{adam_step, AdamState, NnError, ParamStore, ParamVars, Tape, Tensor, Var};
use crate::par;
use crate::policy::{Policy, ACTION_DIM};
use crate::swarm::LocalGraph;

/// Tape handles of a diagonal Gaussian actor with a scalar critic.
#[derive(Debug, Clone, Copy)]
pub struct Heads {
    /// `[B, A]`
    pub mean: Var,
    /// `[1, A]`
    pub log_std: Var,
    /// `[B, 1]`
    pub value: Var,
}

pub trait ActorCritic: Sync {
    type Obs: Sync;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn action_dim(&self) -> usize;
    fn forward(&self, tape: &mut Tape, pv: &ParamVars, obs: &[&Self::Obs]) -> Result<Heads>;

    /// Plain means, log-std and values.
    fn act(&self, obs: &[&Self::Obs]) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        let mut tape = Tape::new();
        let pv = tape.load_params(self.params());
        let h = self.forward(&mut tape, &pv, obs)?;
        let means = tape.value(h.mean).chunks(self.action_dim()).map(<[f64]>::to_vec).collect();
        Ok((means, tape.value(h.log_std).to_vec(), tape.value(h.value).to_vec()))
    }
}

impl ActorCritic for Policy {
    type Obs = LocalGraph;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn forward(&self, tape: &mut Tape, pv: &ParamVars, obs: &[&LocalGraph]) -> Result<Heads> {
        policy_heads(self, tape, pv, obs)
    }
}

pub fn policy_heads(policy: &Policy, tape: &mut Tape, pv: &ParamVars, obs: &[&LocalGraph]) -> Result<Heads> {
    let batch = policy.batch(obs)?;
    let out = Policy::forward(policy, tape, pv, &batch)?;
    Ok(Heads {
        mean: out.mean,
        log_std: out.log_std,
        value: out.value,
    })
}

pub fn gaussian_log_prob(a: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    a.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    0.5 * log_std.iter().map(|ls| 1.0 + (2.0 * PI).ln() + 2.0 * ls).sum::<f64>()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Pre-clip global gradient norm, averaged over minibatches.
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Loss value and parameter gradients over a set of buffer entries.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    /// One tensor per parameter, in store order.
    pub grads: Vec<Tensor>,
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Transitions whose ratio left the clip interval.
    pub clipped: usize,
    pub entropy: f64,
}

/// PPO loss over the entries `idx` of `buf` with advantages `adv`. Every
/// term is divided by `minibatch` rather than `idx.len()`, so the outputs of
/// disjoint chunks of one minibatch sum to the minibatch mean.
pub fn surrogate_loss<M: ActorCritic>(
    model: &M,
    buf: &RolloutBuffer<M::Obs>,
    adv: &[f64],
    idx: &[usize],
    minibatch: usize,
    cfg: &TrainConfig,
) -> Result<LossOutput> {
    let n = idx.len();
    let a_dim = model.action_dim();
    let scale = 1.0 / minibatch as f64;
    let obs: Vec<&M::Obs> = idx.iter().map(|&i| &buf.obs[i]).collect();
    let mut tape = Tape::new();
    let pv = tape.load_params(model.params());
    let h = model.forward(&mut tape, &pv, &obs)?;

    let actions = tape.leaf(n, a_dim, idx.iter().flat_map(|&i| buf.actions[i].iter().copied()).collect())?;
    let diff = tape.sub(actions, h.mean)?;
    let neg_ls = tape.scale(h.log_std, -1.0);
    let inv_std = tape.exp(neg_ls);
    let z = tape.mul_row(diff, inv_std)?;
    let z2 = tape.square(z);
    let quad = tape.sum_axis(z2, 1)?;
    let quad = tape.scale(quad, -0.5);
    let ls_sum = tape.sum_axis(h.log_std, 1)?;
    let ls_neg = tape.scale(ls_sum, -1.0);
    let log_prob = tape.add_row(quad, ls_neg)?;
    let log_prob = tape.add_scalar(log_prob, -0.5 * a_dim as f64 * (2.0 * PI).ln());

    let old = tape.leaf(n, 1, idx.iter().map(|&i| buf.log_probs[i]).collect())?;
    let log_ratio = tape.sub(log_prob, old)?;
    let ratio = tape.exp(log_ratio);
    let advantage = tape.leaf(n, 1, idx.iter().map(|&i| adv[i]).collect())?;
    let s1 = tape.mul(ratio, advantage)?;
    let clipped_ratio = tape.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    let s2 = tape.mul(clipped_ratio, advantage)?;
    let surr = tape.minimum(s1, s2)?;
    let surr = tape.sum(surr);
    let policy_loss = tape.scale(surr, -scale);

    let returns = tape.leaf(n, 1, idx.iter().map(|&i| buf.returns[i]).collect())?;
    let err = tape.sub(h.value, returns)?;
    let err2 = tape.square(err);
    let err2 = tape.sum(err2);
    let value_loss = tape.scale(err2, scale);

    // Entropy of a diagonal Gaussian is Σ log σ plus a constant.
    let ent = tape.sum(h.log_std);
    let ent = tape.scale(ent, n as f64 * scale);

    let weighted_value = tape.scale(value_loss, cfg.value_coef);
    let weighted_ent = tape.scale(ent, -cfg.entropy_coef);
    let loss = tape.add(policy_loss, weighted_value)?;
    let loss = tape.add(loss, weighted_ent)?;

    let clipped = tape.value(ratio).iter().filter(|r| (*r - 1.0).abs() > cfg.clip_ratio).count();
    let pl = tape.scalar_value(policy_loss);
    let vl = tape.scalar_value(value_loss);
    let entropy = gaussian_entropy(tape.value(h.log_std)) * n as f64 * scale;
    if !tape.scalar_value(loss).is_finite() {
        return Err(PpoError::NonFinite("loss".into()));
    }
    let value = tape.scalar_value(loss);
    let grads = tape.backward(loss)?.for_params(model.params(), &pv);
    Ok(LossOutput {
        loss: value,
        grads,
        policy_loss: pl,
        value_loss: vl,
        clipped,
        entropy,
    })
}

/// Epochs of clipped-surrogate SGD over shuffled minibatches of a full
/// buffer with advantages already computed. Advantages are normalized over
/// the whole buffer. On any non-finite value the parameters and optimizer
/// state are restored and an error is returned.
pub fn ppo_update<M: ActorCritic, R: Rng>(
    model: &mut M,
    adam: &mut AdamState,
    buf: &RolloutBuffer<M::Obs>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if buf.advantages.len() != buf.len() || buf.returns.len() != buf.len() {
        return Err(PpoError::BufferNotFull {
            filled: buf.advantages.len(),
            capacity: buf.len(),
        });
    }
    if !buf.all_finite() {
        return Err(PpoError::NonFinite("rollout data".into()));
    }
    let saved_params = model.params().clone();
    let saved_adam = adam.clone();
    let result = run_epochs(model, adam, buf, cfg, rng);
    if result.is_err() {
        *model.params_mut() = saved_params;
        *adam = saved_adam;
    }
    result
}

fn run_epochs<M: ActorCritic, R: Rng>(
    model: &mut M,
    adam: &mut AdamState,
    buf: &RolloutBuffer<M::Obs>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let mut adv = buf.advantages.clone();
    normalize_advantages(&mut adv);
    let adam_cfg = cfg.adam();
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut stats = UpdateStats::default();
    let mut seen = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for mb in order.chunks(cfg.batch_size) {
            let chunks: Vec<&[usize]> = mb.chunks(cfg.grad_chunk).collect();
            let model_ref: &M = model;
            let outs = par::map(&chunks, |idx| surrogate_loss(model_ref, buf, &adv, idx, mb.len(), cfg));
            let mut grads: Option<Vec<Tensor>> = None;
            for out in outs {
                let out = out?;
                stats.policy_loss += out.policy_loss;
                stats.value_loss += out.value_loss;
                stats.entropy += out.entropy;
                stats.clip_fraction += out.clipped as f64;
                grads = Some(match grads {
                    None => out.grads,
                    Some(mut acc) => {
                        for (a, g) in acc.iter_mut().zip(&out.grads) {
                            for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                                *x += y;
                            }
                        }
                        acc
                    }
                });
            }
            let mut grads = grads.unwrap_or_default();
            let norm = adam_step(model.params_mut(), &mut grads, adam, &adam_cfg).map_err(|e| match e {
                NnError::NonFiniteGradient(name) => PpoError::NonFinite(format!("gradient in `{name}`")),
                e => e.into(),
            })?;
            stats.grad_norm += norm;
            stats.minibatches += 1;
            seen += mb.len();
        }
    }
    let k = stats.minibatches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.grad_norm /= k;
    stats.clip_fraction /= seen.max(1) as f64;
    Ok(stats)
}
