use std::sync::Arc;

use nalgebra::Matrix3;

use super::encode::{canonical_vectors, node_invariants, CANONICAL_VECTORS, INVARIANTS};
use super::{PolicyError, Result};
use crate::group::GroupElement;
use crate::quad::QuadState;
use crate::swarm::{pose_of, LocalGraph};

/// Added to attention logits of padding slots.
const MASKED: f64 = -1e30;

fn flat(r: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = r[(i, j)];
        }
    }
    out
}

/// Parameter-free inputs for a batch of local graphs padded to a common
/// node count. Rows are graph-major: node `(b, j)` is row `b·n + j` and pair
/// `(b, v, p)` is row `(b·n + v)·n + p`.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub graphs: usize,
    pub nodes: usize,
    /// Node invariants `[B·n, 21]`.
    pub invariants: Vec<f64>,
    /// Canonical node vectors `[B·n, 24]`.
    pub vectors: Vec<f64>,
    /// Frame rotation of every node row.
    pub node_rot: Arc<[[f64; 9]]>,
    /// Source node row of every pair.
    pub pair_src: Arc<[usize]>,
    /// Updating node row of every pair.
    pub pair_dst: Arc<[usize]>,
    /// Pair row `(b, v, v)` of every node row.
    pub self_pair: Arc<[usize]>,
    /// Frame rotation of the updating node, per pair row.
    pub pair_rot: Arc<[[f64; 9]]>,
    /// Relative pose of `p` in the frame of `v`, `[B·n·n, 12]`.
    pub geometry: Vec<f64>,
    /// Additive attention mask `[B·n, n]`.
    pub mask: Vec<f64>,
    /// Ego frame rotation, per node row.
    pub pool_rot: Arc<[[f64; 9]]>,
    /// Pooling weights `[B, n]`: `1/|nodes|` on real nodes.
    pub pool_weights: Vec<f64>,
    /// Canonical ego vectors `[B, 24]`.
    pub ego_vectors: Vec<f64>,
    /// Ego frame rotation per graph.
    pub ego_rot: Arc<[[f64; 9]]>,
}

fn frame(s: &QuadState, equivariant: bool) -> GroupElement {
    if equivariant {
        pose_of(s)
    } else {
        GroupElement::identity()
    }
}

impl GraphBatch {
    pub fn new(graphs: &[&LocalGraph], equivariant: bool) -> Result<Self> {
        if graphs.iter().any(|g| g.is_empty()) || graphs.is_empty() {
            return Err(PolicyError::EmptyGraph);
        }
        let b = graphs.len();
        let n = graphs.iter().map(|g| g.len()).max().unwrap();
        let m = b * n;
        let pad = QuadState::at_rest(Default::default(), Default::default());

        let mut invariants = Vec::with_capacity(m * INVARIANTS);
        let mut vectors = Vec::with_capacity(m * 3 * CANONICAL_VECTORS);
        let mut frames = Vec::with_capacity(m);
        let mut valid = Vec::with_capacity(m);
        for g in graphs {
            for j in 0..n {
                let s = g.states.get(j).unwrap_or(&pad);
                let f = frame(s, equivariant);
                let v = canonical_vectors(s, &f);
                invariants.extend_from_slice(&node_invariants(&v));
                vectors.extend(v.iter().flat_map(|x| x.iter().copied()));
                frames.push(f);
                valid.push(j < g.len());
            }
        }

        let mut pair_src = Vec::with_capacity(m * n);
        let mut pair_dst = Vec::with_capacity(m * n);
        let mut pair_rot = Vec::with_capacity(m * n);
        let mut geometry = Vec::with_capacity(m * n * 12);
        let mut self_pair = Vec::with_capacity(m);
        let mut mask = Vec::with_capacity(m * n);
        for gi in 0..b {
            for v in 0..n {
                let dst = gi * n + v;
                let fv = &frames[dst];
                let rvt = fv.rotation().transpose();
                self_pair.push(dst * n + v);
                for p in 0..n {
                    let src = gi * n + p;
                    pair_src.push(src);
                    pair_dst.push(dst);
                    pair_rot.push(flat(fv.rotation()));
                    // Relative pose of p seen from v, from the node states so
                    // that the ablation sees absolute poses.
                    let sp = graphs[gi].states.get(p).unwrap_or(&pad);
                    let rel_x = rvt * (sp.position - fv.translation());
                    let rel_r = rvt * sp.rotation;
                    geometry.extend(rel_x.iter());
                    geometry.extend_from_slice(&flat(&rel_r));
                    mask.push(if valid[src] { 0.0 } else { MASKED });
                }
            }
        }

        let mut pool_rot = Vec::with_capacity(m);
        let mut pool_weights = Vec::with_capacity(m);
        let mut ego_vectors = Vec::with_capacity(b * 3 * CANONICAL_VECTORS);
        let mut ego_rot = Vec::with_capacity(b);
        for (gi, g) in graphs.iter().enumerate() {
            let ego = &frames[gi * n + g.ego];
            let w = 1.0 / g.len() as f64;
            for j in 0..n {
                pool_rot.push(flat(ego.rotation()));
                pool_weights.push(if j < g.len() { w } else { 0.0 });
            }
            let v = canonical_vectors(g.ego_state(), ego);
            ego_vectors.extend(v.iter().flat_map(|x| x.iter().copied()));
            ego_rot.push(flat(ego.rotation()));
        }

        Ok(Self {
            graphs: b,
            nodes: n,
            invariants,
            vectors,
            node_rot: frames.iter().map(|f| flat(f.rotation())).collect(),
            pair_src: pair_src.into(),
            pair_dst: pair_dst.into(),
            self_pair: self_pair.into(),
            pair_rot: pair_rot.into(),
            geometry,
            mask,
            pool_rot: pool_rot.into(),
            pool_weights,
            ego_vectors,
            ego_rot: ego_rot.into(),
        })
    }

    pub fn from_graphs(graphs: &[LocalGraph], equivariant: bool) -> Result<Self> {
        let refs: Vec<&LocalGraph> = graphs.iter().collect();
        Self::new(&refs, equivariant)
    }

    pub fn rows(&self) -> usize {
        self.graphs * self.nodes
    }
}
