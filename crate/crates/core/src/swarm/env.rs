use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{build_local_graphs, LocalGraph};
use super::metrics::EpisodeRecord;
use super::neighbors::{neighborhoods_with, NeighborRule};
use super::reward::{reward_terms, ContactFlags, ContactTracker, RewardBreakdown, RewardConfig};
use super::room::Room;
use super::scenario::{Scenario, ScenarioConfig};
use super::EnvError;
use crate::group::axis_angle;
use crate::quad::{normalize_action, step, DynamicsError, QuadParams, QuadState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub agents: usize,
    pub neighbors: NeighborRule,
    pub episode_seconds: f64,
    pub room: Room,
    pub reward: RewardConfig,
    /// Final distance counted as reaching the target (m).
    pub success_radius: f64,
    /// Largest initial roll/pitch tilt (degrees).
    pub max_tilt_deg: f64,
    /// Initial positions keep this far from the walls (m).
    pub spawn_margin: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            agents: 8,
            neighbors: NeighborRule::default(),
            episode_seconds: 15.0,
            room: Room::default(),
            reward: RewardConfig::default(),
            success_radius: 0.25,
            max_tilt_deg: 10.0,
            spawn_margin: 0.5,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.agents == 0 {
            return Err("env.agents must be at least 1".into());
        }
        if !(self.episode_seconds > 0.0) {
            return Err("env.episode_seconds must be positive".into());
        }
        if !(self.reward.min_separation > 0.0 && self.reward.proximity_onset > 0.0) {
            return Err("reward distances must be positive".into());
        }
        self.room.validate()
    }

    pub fn episode_steps(&self, quad: &QuadParams) -> usize {
        (self.episode_seconds / quad.dt_ctrl).round().max(1.0) as usize
    }
}

/// Result of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<RewardBreakdown>,
    pub contacts: Vec<ContactFlags>,
    /// Episode ended (time limit or divergence).
    pub done: bool,
    pub diverged: bool,
    /// Summary of the finished episode when `done`.
    pub episode: Option<EpisodeRecord>,
}

/// A swarm in a room chasing scenario targets.
#[derive(Debug, Clone)]
pub struct SwarmEnv {
    pub config: EnvConfig,
    pub quad: QuadParams,
    pub scenario_config: ScenarioConfig,
    scenario: Scenario,
    agents: Vec<QuadState>,
    step_index: usize,
    tracker: ContactTracker,
    rng: ChaCha8Rng,
    reward_sums: Vec<f64>,
    collisions: Vec<u32>,
    agent_contact: Vec<bool>,
}

impl SwarmEnv {
    pub fn new(config: EnvConfig, quad: QuadParams, scenario_config: ScenarioConfig, seed: u64) -> Result<Self, EnvError> {
        config.validate().map_err(EnvError::Config)?;
        scenario_config.validate().map_err(EnvError::Config)?;
        quad.validate()?;
        let n = config.agents;
        let mut env = Self {
            config,
            quad,
            scenario_config,
            scenario: Scenario::new(scenario_config, config.room, n, 0),
            agents: Vec::new(),
            step_index: 0,
            tracker: ContactTracker::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            reward_sums: vec![0.0; n],
            collisions: vec![0; n],
            agent_contact: vec![false; n],
        };
        env.reset()?;
        Ok(env)
    }

    /// Starts a new episode with a fresh scenario seed and random spawn.
    pub fn reset(&mut self) -> Result<(), EnvError> {
        let n = self.config.agents;
        self.scenario.seed = self.rng.gen();
        let targets = self.scenario.targets(0.0);
        let sep = self.config.reward.proximity_onset;
        let mut positions: Vec<Vector3<f64>> = Vec::with_capacity(n);
        let mut tries = 0;
        while positions.len() < n {
            tries += 1;
            if tries > 100_000 {
                return Err(EnvError::Config(format!(
                    "could not place {n} agents {sep} m apart in {:?}",
                    self.config.room
                )));
            }
            let p = self.sample_interior();
            if positions.iter().all(|q| (p - q).norm() >= sep) {
                positions.push(p);
            }
        }
        let max_tilt = self.config.max_tilt_deg.to_radians();
        self.agents = positions
            .iter()
            .zip(&targets)
            .map(|(&p, &t)| {
                let yaw = self.rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                let dir = self.rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                let tilt = if max_tilt > 0.0 { self.rng.gen_range(0.0..=max_tilt) } else { 0.0 };
                let axis = Vector3::new(dir.cos(), dir.sin(), 0.0);
                let mut s = QuadState::at_rest(p, t);
                s.rotation = axis_angle(axis, tilt) * axis_angle(Vector3::z(), yaw);
                s
            })
            .collect();
        self.step_index = 0;
        self.tracker.reset();
        self.reward_sums = vec![0.0; n];
        self.collisions = vec![0; n];
        self.agent_contact = vec![false; n];
        Ok(())
    }

    fn sample_interior(&mut self) -> Vector3<f64> {
        let room = self.config.room;
        let m = self.config.spawn_margin;
        let (lo, hi) = (room.lower(), room.upper());
        let mut p = Vector3::zeros();
        for i in 0..3 {
            let (a, b) = (lo[i] + m, hi[i] - m);
            p[i] = if a < b { self.rng.gen_range(a..b) } else { (lo[i] + hi[i]) / 2.0 };
        }
        p
    }

    pub fn agents(&self) -> &[QuadState] {
        &self.agents
    }

    /// Replaces the swarm state; targets are kept as given.
    pub fn set_agents(&mut self, agents: Vec<QuadState>) {
        assert_eq!(agents.len(), self.config.agents);
        self.agents = agents;
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.quad.dt_ctrl
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn episode_steps(&self) -> usize {
        self.config.episode_steps(&self.quad)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn local_graphs(&self) -> Vec<LocalGraph> {
        build_local_graphs(&self.agents, &self.config.neighbors)
    }

    /// Advances every agent one control period under raw policy outputs `u`.
    pub fn step(&mut self, u: &[[f64; 4]]) -> Result<StepOutcome, EnvError> {
        let n = self.config.agents;
        if u.len() != n {
            return Err(EnvError::ActionCount { expected: n, got: u.len() });
        }
        let room = self.config.room;
        let (lo, hi) = (room.lower(), room.upper());
        let mut diverged = false;
        let mut on_wall = vec![false; n];
        for i in 0..n {
            let a = normalize_action(&u[i])?;
            match step(&self.agents[i], &a, &self.quad) {
                Ok(mut s) => {
                    for k in 0..3 {
                        if s.position[k] <= lo[k] {
                            s.position[k] = lo[k];
                            s.velocity[k] = s.velocity[k].max(0.0);
                            on_wall[i] = true;
                        } else if s.position[k] >= hi[k] {
                            s.position[k] = hi[k];
                            s.velocity[k] = s.velocity[k].min(0.0);
                            on_wall[i] = true;
                        }
                    }
                    self.agents[i] = s;
                }
                Err(DynamicsError::Diverged { .. }) => diverged = true,
                Err(e) => return Err(e.into()),
            }
        }
        self.step_index += 1;
        let targets = self.scenario.targets(self.time());
        for (s, t) in self.agents.iter_mut().zip(targets) {
            s.target = t;
        }

        let positions: Vec<_> = self.agents.iter().map(|s| s.position).collect();
        let contacts = self.tracker.update(&positions, &on_wall, self.config.reward.min_separation);
        let neighbors = neighborhoods_with(&positions, &self.config.neighbors);
        let coeffs = self.config.reward.coeffs(self.quad.dt_ctrl);
        let rewards: Vec<RewardBreakdown> = (0..n)
            .map(|i| {
                let nb: Vec<_> = neighbors[i].iter().map(|&j| positions[j]).collect();
                reward_terms(&self.agents[i], &nb, &u[i], &coeffs, contacts[i].charged)
            })
            .collect();
        for i in 0..n {
            self.reward_sums[i] += rewards[i].total;
            self.collisions[i] += contacts[i].charged as u32;
            self.agent_contact[i] |= contacts[i].agent;
        }
        let done = diverged || self.step_index >= self.episode_steps();
        let episode = done.then(|| EpisodeRecord {
            rewards: self.reward_sums.clone(),
            final_distances: self.agents.iter().map(QuadState::distance_to_target).collect(),
            collisions: self.collisions.clone(),
            agent_contact: self.agent_contact.clone(),
            steps: self.step_index,
            diverged,
        });
        Ok(StepOutcome {
            rewards,
            contacts,
            done,
            diverged,
            episode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ortho_error;

    fn env(seed: u64) -> SwarmEnv {
        let cfg = EnvConfig {
            agents: 3,
            room: Room::cube(4.0),
            episode_seconds: 0.5,
            ..Default::default()
        };
        SwarmEnv::new(cfg, QuadParams::default(), ScenarioConfig::default(), seed).unwrap()
    }

    #[test]
    fn spawn_respects_separation_and_tilt() {
        let e = env(4);
        let a = e.agents();
        for i in 0..3 {
            assert!(e.config.room.contains(&a[i].position));
            assert!(ortho_error(&a[i].rotation) < 1e-9);
            let tilt = a[i].rotation[(2, 2)].clamp(-1.0, 1.0).acos();
            assert!(tilt <= 10f64.to_radians() + 1e-12);
            for j in i + 1..3 {
                assert!((a[i].position - a[j].position).norm() >= 0.6);
            }
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let run = |seed| {
            let mut e = env(seed);
            let mut out = Vec::new();
            for k in 0..60 {
                let u = [[0.1 * (k % 3) as f64 - 0.1, 0.0, 0.2, -0.3]; 3];
                let o = e.step(&u).unwrap();
                out.push((e.agents().to_vec(), o.rewards));
                if o.done {
                    e.reset().unwrap();
                }
            }
            out
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn episode_ends_at_time_limit() {
        let mut e = env(1);
        let hover = [QuadParams::default().hover_action().map(|a| 2.0 * a - 1.0); 3];
        for k in 1..=50 {
            let o = e.step(&hover).unwrap();
            assert_eq!(o.done, k == 50);
            if o.done {
                let ep = o.episode.unwrap();
                assert_eq!(ep.steps, 50);
                let total: f64 = ep.rewards.iter().sum();
                assert!(total < 0.0);
            }
        }
    }

    #[test]
    fn falling_agent_hits_floor_once() {
        let mut e = env(2);
        let off = [[-1.0; 4]; 3];
        let mut charged = vec![0; 3];
        for _ in 0..50 {
            let o = e.step(&off).unwrap();
            for (c, f) in charged.iter_mut().zip(&o.contacts) {
                *c += f.charged as u32;
            }
        }
        // A resting contact with the floor is charged a single time.
        assert!(e.agents().iter().all(|s| s.position.z >= 0.0));
        assert!(charged.iter().all(|&c| c <= 1));
    }

    #[test]
    fn wrong_action_count_is_rejected() {
        let mut e = env(0);
        assert!(matches!(e.step(&[[0.0; 4]; 2]), Err(EnvError::ActionCount { expected: 3, got: 2 })));
    }
}
