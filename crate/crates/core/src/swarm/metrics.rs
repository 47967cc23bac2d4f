use serde::{Deserialize, Serialize};

use super::EnvError;

/// Per-agent outcome of one finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Sum of per-step rewards for each agent.
    pub rewards: Vec<f64>,
    pub final_distances: Vec<f64>,
    /// Charged contact events (agents and walls) per agent.
    pub collisions: Vec<u32>,
    /// Whether each agent was ever within contact distance of another.
    pub agent_contact: Vec<bool>,
    pub steps: usize,
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episodes: usize,
    pub mean_reward_per_agent: f64,
    pub mean_final_distance: f64,
    pub collisions_per_episode: f64,
    pub success_rate: f64,
    pub inter_agent_collision_rate: f64,
}

impl EpisodeRecord {
    pub fn agents(&self) -> usize {
        self.rewards.len()
    }

    pub fn metrics(&self, success_radius: f64) -> EpisodeMetrics {
        let n = self.agents().max(1) as f64;
        let successes = self
            .final_distances
            .iter()
            .zip(&self.collisions)
            .filter(|(&d, &c)| d <= success_radius && c == 0)
            .count();
        EpisodeMetrics {
            episodes: 1,
            mean_reward_per_agent: self.rewards.iter().sum::<f64>() / n,
            mean_final_distance: self.final_distances.iter().sum::<f64>() / n,
            collisions_per_episode: self.collisions.iter().map(|&c| c as f64).sum(),
            success_rate: successes as f64 / n,
            inter_agent_collision_rate: self.agent_contact.iter().filter(|&&c| c).count() as f64 / n,
        }
    }
}

/// Averages per-episode metrics over `episodes`.
pub fn summarize(episodes: &[EpisodeRecord], success_radius: f64) -> Result<EpisodeMetrics, EnvError> {
    if episodes.is_empty() {
        return Err(EnvError::EmptyTrace);
    }
    let k = episodes.len() as f64;
    let mut out = EpisodeMetrics {
        episodes: episodes.len(),
        mean_reward_per_agent: 0.0,
        mean_final_distance: 0.0,
        collisions_per_episode: 0.0,
        success_rate: 0.0,
        inter_agent_collision_rate: 0.0,
    };
    for e in episodes {
        let m = e.metrics(success_radius);
        out.mean_reward_per_agent += m.mean_reward_per_agent / k;
        out.mean_final_distance += m.mean_final_distance / k;
        out.collisions_per_episode += m.collisions_per_episode / k;
        out.success_rate += m.success_rate / k;
        out.inter_agent_collision_rate += m.inter_agent_collision_rate / k;
    }
    Ok(out)
}
