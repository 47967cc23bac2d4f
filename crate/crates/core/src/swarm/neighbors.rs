use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// How each agent's neighbor set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NeighborRule {
    /// The `k` nearest other agents.
    Nearest { k: usize },
    /// Every agent within `radius`, keeping at most `k` of the nearest.
    Radius { radius: f64, k: usize },
}

impl Default for NeighborRule {
    fn default() -> Self {
        NeighborRule::Nearest { k: 7 }
    }
}

impl NeighborRule {
    pub fn cap(&self) -> usize {
        match *self {
            NeighborRule::Nearest { k } | NeighborRule::Radius { k, .. } => k,
        }
    }
}

/// K nearest neighbors of every agent by Euclidean distance, ties broken by
/// lower index.
pub fn neighborhoods(positions: &[Vector3<f64>], k: usize) -> Vec<Vec<usize>> {
    neighborhoods_with(positions, &NeighborRule::Nearest { k })
}

pub fn neighborhoods_with(positions: &[Vector3<f64>], rule: &NeighborRule) -> Vec<Vec<usize>> {
    let n = positions.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((positions[i] - positions[j]).norm_squared(), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let NeighborRule::Radius { radius, .. } = rule {
                others.retain(|&(d2, _)| d2 <= radius * radius);
            }
            others.truncate(rule.cap());
            others.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}
