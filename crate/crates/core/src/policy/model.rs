use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::GraphBatch;
use super::encode::{CANONICAL_VECTORS, INVARIANTS};
use super::{GraphormerConfig, PolicyError, Result};
use crate::nn::{xavier_uniform, Linear, Mlp, ParamId, ParamStore, ParamVars, Tape, Tensor, Var};
use crate::swarm::LocalGraph;

pub const ACTION_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
struct AttentionHead {
    query: Linear,
    key: Linear,
    value: Linear,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layer {
    heads: Vec<AttentionHead>,
    ff: Mlp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    lift_scalar: Linear,
    lift_vector: ParamId,
    layers: Vec<Layer>,
    ego: Mlp,
    joint: Mlp,
    head: Mlp,
    critic: Mlp,
    log_std: ParamId,
}

/// Policy weights plus the structure that indexes them.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub config: GraphormerConfig,
    pub params: ParamStore,
    layout: Layout,
}

/// Tape handles produced by [`Policy::forward`].
#[derive(Debug, Clone, Copy)]
pub struct PolicyOutput {
    /// Gaussian mean `[B, 4]`.
    pub mean: Var,
    /// State-independent log standard deviation `[1, 4]`.
    pub log_std: Var,
    /// Critic estimate `[B, 1]`.
    pub value: Var,
    /// Trunk output in world coordinates `[B, trunk[3]]`: scalars first,
    /// then 3-vectors.
    pub features: Var,
    /// Mean node embedding in the ego frame `[B, feature_width]`.
    pub pooled: Var,
    /// Final node features in world coordinates `[B·n, feature_width]`.
    pub nodes: Var,
}

/// Plain values of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mean: Vec<[f64; ACTION_DIM]>,
    pub log_std: [f64; ACTION_DIM],
    pub value: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub pooled: Vec<Vec<f64>>,
}

fn rows(data: &[f64], width: usize) -> Vec<Vec<f64>> {
    data.chunks(width).map(<[f64]>::to_vec).collect()
}

impl Policy {
    /// Fresh weights drawn from `seed`.
    pub fn new(config: GraphormerConfig, seed: u64) -> Result<Self> {
        config.validate().map_err(PolicyError::Config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let c = &config;
        let d = c.feature_width();
        let z = d + 12;

        let lift_scalar = Linear::new(&mut p, "lift.scalar", INVARIANTS, c.scalars, 1.0, &mut rng);
        let lift_vector = p.add("lift.vector", xavier_uniform(CANONICAL_VECTORS, c.vectors, 1.0, &mut rng));
        let layers = (0..c.layers)
            .map(|l| {
                let heads = (0..c.heads)
                    .map(|h| AttentionHead {
                        query: Linear::new(&mut p, &format!("layer{l}.head{h}.query"), z, c.key_dim, 1.0, &mut rng),
                        key: Linear::new(&mut p, &format!("layer{l}.head{h}.key"), z, c.key_dim, 1.0, &mut rng),
                        value: Linear::new(&mut p, &format!("layer{l}.head{h}.value"), z, d, 1.0, &mut rng),
                    })
                    .collect();
                let ff = Mlp::new(&mut p, &format!("layer{l}.ff"), &[d, c.ff_hidden, d], false, 1.0, &mut rng);
                Layer { heads, ff }
            })
            .collect();
        let [t0, t1, t2, t3] = c.trunk;
        let ego = Mlp::new(&mut p, "trunk.ego", &[3 * CANONICAL_VECTORS, t0, t1], true, 1.0, &mut rng);
        let joint = Mlp::new(&mut p, "trunk.joint", &[t1 + d, t2, t3], true, 1.0, &mut rng);
        let head = Mlp::new(&mut p, "head", &[t3, c.head_hidden, ACTION_DIM], false, c.mean_gain, &mut rng);
        let out_bias = head.layers.last().unwrap().bias;
        p.get_mut(out_bias).data_mut().fill(c.mean_bias_init);
        let critic = Mlp::new(&mut p, "critic", &[c.out_scalars, c.critic_hidden, 1], false, 1.0, &mut rng);
        let log_std = p.add("log_std", Tensor::full(&[1, ACTION_DIM], c.log_std_init));

        Ok(Self {
            config,
            params: p,
            layout: Layout {
                lift_scalar,
                lift_vector,
                layers,
                ego,
                joint,
                head,
                critic,
                log_std,
            },
        })
    }

    /// `(W, b, V)` of the input lift: scalars `inv·W + b` with `W` of shape
    /// `21 × scalars`, vectors mixed by `V` of shape `8 × vectors`.
    pub fn lift_params(&self) -> (&[f64], &[f64], &[f64]) {
        let l = &self.layout;
        (
            self.params.get(l.lift_scalar.weight).data(),
            self.params.get(l.lift_scalar.bias).data(),
            self.params.get(l.lift_vector).data(),
        )
    }

    pub fn batch(&self, graphs: &[&LocalGraph]) -> Result<GraphBatch> {
        GraphBatch::new(graphs, self.config.equivariant)
    }

    pub fn forward(&self, tape: &mut Tape, pv: &ParamVars, batch: &GraphBatch) -> Result<PolicyOutput> {
        let c = &self.config;
        let l = &self.layout;
        let (b, n, m) = (batch.graphs, batch.nodes, batch.rows());
        let d = c.feature_width();

        // Node lift, then vectors to world coordinates.
        let inv = tape.leaf(m, INVARIANTS, batch.invariants.clone())?;
        let vecs = tape.leaf(m, 3 * CANONICAL_VECTORS, batch.vectors.clone())?;
        let s0 = l.lift_scalar.forward(tape, pv, inv)?;
        let v0 = tape.channel_mix(vecs, pv.get(l.lift_vector))?;
        let v0 = tape.rotate_vectors(v0, 0, c.vectors, batch.node_rot.clone(), false)?;
        let mut x = tape.concat_cols(&[s0, v0])?;

        let geometry = tape.leaf(m * n, 12, batch.geometry.clone())?;
        let mask = tape.leaf(m, n, batch.mask.clone())?;
        let temperature = if c.scaled_attention { 1.0 / (c.key_dim as f64).sqrt() } else { 1.0 };
        for layer in &l.layers {
            // Every (v, p) pair sees p's feature and pose in v's frame.
            let zf = tape.gather_rows(x, batch.pair_src.clone())?;
            let zf = tape.rotate_vectors(zf, c.scalars, c.vectors, batch.pair_rot.clone(), true)?;
            let z = tape.concat_cols(&[zf, geometry])?;
            let z_self = tape.gather_rows(z, batch.self_pair.clone())?;
            let mut attn: Option<Var> = None;
            for h in &layer.heads {
                let q = h.query.forward(tape, pv, z_self)?;
                let k = h.key.forward(tape, pv, z)?;
                let v = h.value.forward(tape, pv, z)?;
                let q = tape.gather_rows(q, batch.pair_dst.clone())?;
                let logits = tape.row_dot(q, k)?;
                let logits = tape.scale(logits, temperature);
                let logits = tape.reshape(logits, m, n)?;
                let logits = tape.add(logits, mask)?;
                let alpha = tape.softmax_rows(logits);
                let out = tape.weighted_group_sum(alpha, v)?;
                attn = Some(match attn {
                    Some(a) => tape.add(a, out)?,
                    None => out,
                });
            }
            let f_local = tape.slice_cols(z_self, 0, d)?;
            let u = tape.add(f_local, attn.expect("at least one head"))?;
            let mut y = layer.ff.forward(tape, pv, u)?;
            if c.layer_norm {
                y = tape.typed_norm(y, c.scalars, c.layer_norm_eps)?;
            }
            x = tape.rotate_vectors(y, c.scalars, c.vectors, batch.node_rot.clone(), false)?;
        }

        // Mean embedding over the graph in the ego frame.
        let in_ego = tape.rotate_vectors(x, c.scalars, c.vectors, batch.pool_rot.clone(), true)?;
        let weights = tape.leaf(b, n, batch.pool_weights.clone())?;
        let pooled = tape.weighted_group_sum(weights, in_ego)?;

        let ego = tape.leaf(b, 3 * CANONICAL_VECTORS, batch.ego_vectors.clone())?;
        let e = l.ego.forward(tape, pv, ego)?;
        let joint = tape.concat_cols(&[e, pooled])?;
        let local = l.joint.forward(tape, pv, joint)?;
        let features = tape.rotate_vectors(local, c.out_scalars, c.out_vectors(), batch.ego_rot.clone(), false)?;

        let mean = l.head.forward(tape, pv, features)?;
        let scalars = tape.slice_cols(features, 0, c.out_scalars)?;
        let value = l.critic.forward(tape, pv, scalars)?;
        Ok(PolicyOutput {
            mean,
            log_std: pv.get(l.log_std),
            value,
            features,
            pooled,
            nodes: x,
        })
    }

    pub fn evaluate(&self, graphs: &[&LocalGraph]) -> Result<Evaluation> {
        let batch = self.batch(graphs)?;
        let mut tape = Tape::new();
        let pv = tape.load_params(&self.params);
        let out = self.forward(&mut tape, &pv, &batch)?;
        let ls = tape.value(out.log_std);
        Ok(Evaluation {
            mean: tape
                .value(out.mean)
                .chunks(ACTION_DIM)
                .map(|r| [r[0], r[1], r[2], r[3]])
                .collect(),
            log_std: [ls[0], ls[1], ls[2], ls[3]],
            value: tape.value(out.value).to_vec(),
            features: rows(tape.value(out.features), self.config.trunk[3]),
            pooled: rows(tape.value(out.pooled), self.config.feature_width()),
        })
    }

    pub fn log_std(&self) -> &[f64] {
        self.params.get(self.layout.log_std).data()
    }
}
