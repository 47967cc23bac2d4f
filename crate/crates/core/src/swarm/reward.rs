use std::collections::HashSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::quad::QuadState;

/// Reward weights before scaling by the control period, plus the contact
/// distances they refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Distance-to-target weight per second.
    pub position: f64,
    /// One-off penalty per newly detected contact.
    pub collision: f64,
    /// Proximity hinge weight per second.
    pub proximity: f64,
    /// Angular-rate weight per second.
    pub omega: f64,
    /// Raw-action magnitude weight per second.
    pub effort: f64,
    /// Contact distance between agent centers (m).
    pub min_separation: f64,
    /// Distance at which the proximity hinge starts (m).
    pub proximity_onset: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            position: 0.5,
            collision: 5.0,
            proximity: 5.0,
            omega: 0.01,
            effort: 0.05,
            min_separation: 0.1,
            proximity_onset: 0.6,
        }
    }
}

/// Coefficients `c₁ … c₅` after scaling by the control period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub proximity_onset: f64,
}

impl RewardConfig {
    pub fn coeffs(&self, dt: f64) -> RewardCoeffs {
        RewardCoeffs {
            c1: self.position * dt,
            c2: self.collision,
            c3: self.proximity * dt,
            c4: self.omega * dt,
            c5: self.effort * dt,
            proximity_onset: self.proximity_onset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub position: f64,
    pub collision: f64,
    pub stability: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(position: f64, collision: f64, stability: f64) -> Self {
        Self {
            position,
            collision,
            stability,
            total: position + collision + stability,
        }
    }
}

/// Per-agent reward. `neighbors` holds the positions of the agent's
/// neighbor set; `charged` is true when a contact was newly detected this
/// step. `u` is the raw policy output.
pub fn reward_terms(
    ego: &QuadState,
    neighbors: &[Vector3<f64>],
    u: &[f64; 4],
    c: &RewardCoeffs,
    charged: bool,
) -> RewardBreakdown {
    let position = -c.c1 * ego.distance_to_target();
    let hinge: f64 = neighbors
        .iter()
        .map(|x| (1.0 - (ego.position - x).norm() / c.proximity_onset).max(0.0))
        .sum();
    let collision = -(if charged { c.c2 } else { 0.0 }) - c.c3 * hinge;
    let u_norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let stability = -c.c4 * ego.omega.norm() - c.c5 * u_norm;
    RewardBreakdown::new(position, collision, stability)
}

/// Contacts seen by one agent in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContactFlags {
    /// Some other agent is within the contact distance.
    pub agent: bool,
    /// The agent is touching a room wall.
    pub wall: bool,
    /// A contact began this step and is charged the collision penalty.
    pub charged: bool,
}

/// Remembers ongoing contacts so each is penalized only when first
/// detected. A pair re-arms once it separates beyond the contact distance;
/// a wall contact re-arms once the agent leaves the wall.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactTracker {
    pairs: HashSet<(usize, usize)>,
    walls: HashSet<usize>,
}

impl ContactTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
        self.walls.clear();
    }

    pub fn update(&mut self, positions: &[Vector3<f64>], on_wall: &[bool], min_separation: f64) -> Vec<ContactFlags> {
        let n = positions.len();
        let mut flags = vec![ContactFlags::default(); n];
        let mut pairs = HashSet::new();
        for a in 0..n {
            for b in a + 1..n {
                if (positions[a] - positions[b]).norm() <= min_separation {
                    pairs.insert((a, b));
                    for i in [a, b] {
                        flags[i].agent = true;
                        if !self.pairs.contains(&(a, b)) {
                            flags[i].charged = true;
                        }
                    }
                }
            }
        }
        let mut walls = HashSet::new();
        for (i, &w) in on_wall.iter().enumerate() {
            if w {
                walls.insert(i);
                flags[i].wall = true;
                if !self.walls.contains(&i) {
                    flags[i].charged = true;
                }
            }
        }
        self.pairs = pairs;
        self.walls = walls;
        flags
    }
}
