use serde::{Deserialize, Serialize};

use super::neighbors::{neighborhoods_with, NeighborRule};
use crate::group::{act_on_state, GroupElement};
use crate::quad::QuadState;

/// An agent's complete local graph over itself and its neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalGraph {
    /// Swarm index of each node.
    pub agents: Vec<usize>,
    pub states: Vec<QuadState>,
    /// Slot of the ego agent within `agents`.
    pub ego: usize,
}

impl LocalGraph {
    pub fn new(agents: Vec<usize>, states: Vec<QuadState>, ego: usize) -> Self {
        assert_eq!(agents.len(), states.len());
        assert!(ego < states.len(), "ego slot out of range");
        Self { agents, states, ego }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn ego_state(&self) -> &QuadState {
        &self.states[self.ego]
    }

    /// Pose `(R_j, x_j)` of node `j`.
    pub fn pose(&self, j: usize) -> GroupElement {
        pose_of(&self.states[j])
    }

    /// Undirected edges of the complete graph, `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
    }

    /// Applies `g` to every node state.
    pub fn transformed(&self, g: &GroupElement) -> LocalGraph {
        LocalGraph {
            agents: self.agents.clone(),
            states: self.states.iter().map(|s| act_on_state(g, s)).collect(),
            ego: self.ego,
        }
    }

    /// Reorders nodes so that new slot `k` holds old slot `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> LocalGraph {
        assert_eq!(perm.len(), self.len());
        let ego = perm.iter().position(|&p| p == self.ego).expect("permutation covers ego");
        LocalGraph {
            agents: perm.iter().map(|&p| self.agents[p]).collect(),
            states: perm.iter().map(|&p| self.states[p]).collect(),
            ego,
        }
    }
}

pub fn pose_of(s: &QuadState) -> GroupElement {
    GroupElement::new(s.rotation, s.position)
}

/// Local graph of agent `i`: the ego in slot 0, then its neighbors nearest
/// first.
pub fn build_local_graph(agents: &[QuadState], i: usize, rule: &NeighborRule) -> LocalGraph {
    let positions: Vec<_> = agents.iter().map(|s| s.position).collect();
    let nb = neighborhoods_with(&positions, rule).swap_remove(i);
    graph_from_neighbors(agents, i, &nb)
}

pub fn graph_from_neighbors(agents: &[QuadState], i: usize, neighbors: &[usize]) -> LocalGraph {
    let mut idx = Vec::with_capacity(neighbors.len() + 1);
    idx.push(i);
    idx.extend_from_slice(neighbors);
    let states = idx.iter().map(|&j| agents[j]).collect();
    LocalGraph::new(idx, states, 0)
}

/// Local graphs of every agent.
pub fn build_local_graphs(agents: &[QuadState], rule: &NeighborRule) -> Vec<LocalGraph> {
    let positions: Vec<_> = agents.iter().map(|s| s.position).collect();
    neighborhoods_with(&positions, rule)
        .iter()
        .enumerate()
        .map(|(i, nb)| graph_from_neighbors(agents, i, nb))
        .collect()
}
