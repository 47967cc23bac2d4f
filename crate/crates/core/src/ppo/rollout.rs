use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{gaussian_log_prob, ActorCritic, Result, RolloutBuffer};
use crate::policy::ACTION_DIM;
use crate::quad::QuadParams;
use crate::swarm::{EnvConfig, EpisodeRecord, LocalGraph, ScenarioConfig, SwarmEnv, TraceRow};
use crate::par;

/// One environment instance plus the noise stream for its actions.
#[derive(Debug, Clone)]
pub struct Worker {
    pub env: SwarmEnv,
    rng: ChaCha8Rng,
    /// Episodes finished since the last drain.
    pub finished: Vec<EpisodeRecord>,
    pub diverged: usize,
}

impl Worker {
    pub fn new(env: SwarmEnv, seed: u64) -> Self {
        Self {
            env,
            rng: ChaCha8Rng::seed_from_u64(seed),
            finished: Vec::new(),
            diverged: 0,
        }
    }

    pub fn drain_finished(&mut self) -> Vec<EpisodeRecord> {
        std::mem::take(&mut self.finished)
    }
}

struct StepRow {
    graphs: Vec<LocalGraph>,
    actions: Vec<[f64; ACTION_DIM]>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    done: bool,
}

fn worker_step<M: ActorCritic<Obs = LocalGraph>>(model: &M, w: &mut Worker, deterministic: bool) -> Result<StepRow> {
    let graphs = w.env.local_graphs();
    let refs: Vec<&LocalGraph> = graphs.iter().collect();
    let (means, log_std, values) = model.act(&refs)?;
    let mut actions = Vec::with_capacity(means.len());
    let mut log_probs = Vec::with_capacity(means.len());
    for m in &means {
        let mut a = [0.0; ACTION_DIM];
        for d in 0..ACTION_DIM {
            let eps: f64 = if deterministic { 0.0 } else { StandardNormal.sample(&mut w.rng) };
            a[d] = m[d] + log_std[d].exp() * eps;
        }
        log_probs.push(gaussian_log_prob(&a, m, &log_std));
        actions.push(a);
    }
    let out = w.env.step(&actions)?;
    if out.done {
        if out.diverged {
            w.diverged += 1;
        }
        w.finished.extend(out.episode);
        w.env.reset()?;
    }
    Ok(StepRow {
        graphs,
        actions,
        log_probs,
        values,
        rewards: out.rewards.iter().map(|r| r.total).collect(),
        done: out.done,
    })
}

/// Steps every worker `length` times with Gaussian actions from an
/// immutable snapshot of `model`. Workers run in parallel; rows are stored
/// in worker order so the buffer does not depend on scheduling. Sequence
/// `w · agents + i` holds agent `i` of worker `w`.
pub fn collect<M: ActorCritic<Obs = LocalGraph>>(
    model: &M,
    workers: &mut [Worker],
    length: usize,
    deterministic: bool,
) -> Result<RolloutBuffer<LocalGraph>> {
    let agents = workers.first().map_or(0, |w| w.env.config.agents);
    let mut buf = RolloutBuffer::new(workers.len() * agents, length);
    for _ in 0..length {
        let rows = par::map_mut(workers, |w| worker_step(model, w, deterministic));
        for row in rows {
            let row = row?;
            for (i, g) in row.graphs.into_iter().enumerate() {
                buf.push(g, row.actions[i].to_vec(), row.log_probs[i], row.rewards[i], row.values[i], row.done);
            }
        }
    }
    let last = par::map_mut(workers, |w| -> Result<Vec<f64>> {
        let graphs = w.env.local_graphs();
        let refs: Vec<&LocalGraph> = graphs.iter().collect();
        Ok(model.act(&refs)?.2)
    });
    for v in last {
        buf.last_values.extend(v?);
    }
    Ok(buf)
}

/// Runs `episodes` episodes with the mean action.
pub fn evaluate_policy<M: ActorCritic<Obs = LocalGraph>>(
    model: &M,
    env: EnvConfig,
    quad: QuadParams,
    scenario: ScenarioConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    let mut w = Worker::new(SwarmEnv::new(env, quad, scenario, seed)?, seed);
    while w.finished.len() < episodes {
        worker_step(model, &mut w, true)?;
    }
    Ok(w.drain_finished())
}

/// Plays one episode with the mean action and records every agent after
/// every control step.
pub fn trace_episode<M: ActorCritic<Obs = LocalGraph>>(
    model: &M,
    env: EnvConfig,
    quad: QuadParams,
    scenario: ScenarioConfig,
    seed: u64,
) -> Result<Vec<TraceRow>> {
    let mut env = SwarmEnv::new(env, quad, scenario, seed)?;
    let mut rows = Vec::new();
    loop {
        let graphs = env.local_graphs();
        let refs: Vec<&LocalGraph> = graphs.iter().collect();
        let (means, _, _) = model.act(&refs)?;
        let u: Vec<[f64; ACTION_DIM]> = means.iter().map(|m| [m[0], m[1], m[2], m[3]]).collect();
        let out = env.step(&u)?;
        let t = env.time();
        for (i, s) in env.agents().iter().enumerate() {
            rows.push(TraceRow {
                t,
                agent: i,
                state: *s,
                u: u[i],
                reward: out.rewards[i],
                contacts: out.contacts[i],
            });
        }
        if out.done {
            return Ok(rows);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{GraphormerConfig, Policy};
    use crate::swarm::Room;

    fn tiny() -> Policy {
        let cfg = GraphormerConfig {
            layers: 1,
            scalars: 4,
            vectors: 3,
            key_dim: 4,
            ff_hidden: 8,
            trunk: [8, 8, 8, 8],
            out_scalars: 5,
            head_hidden: 8,
            critic_hidden: 8,
            ..Default::default()
        };
        Policy::new(cfg, 0).unwrap()
    }

    fn workers(n: usize) -> Vec<Worker> {
        let env = EnvConfig {
            agents: 3,
            room: Room::cube(4.0),
            episode_seconds: 0.2,
            ..Default::default()
        };
        (0..n)
            .map(|w| Worker::new(SwarmEnv::new(env, QuadParams::default(), ScenarioConfig::default(), 7 + w as u64).unwrap(), 100 + w as u64))
            .collect()
    }

    #[test]
    fn buffer_has_workers_times_agents_times_length() {
        let p = tiny();
        let mut ws = workers(2);
        let buf = collect(&p, &mut ws, 128, false).unwrap();
        assert_eq!(buf.len(), 768);
        assert!(buf.is_full());
        assert!(ws.iter().all(|w| w.finished.len() == 6));
    }

    #[test]
    fn deterministic_collection_repeats() {
        let p = tiny();
        let a = collect(&p, &mut workers(2), 30, true).unwrap();
        let b = collect(&p, &mut workers(2), 30, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stochastic_collection_is_seeded() {
        let p = tiny();
        let a = collect(&p, &mut workers(2), 30, false).unwrap();
        let b = collect(&p, &mut workers(2), 30, false).unwrap();
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.rewards, b.rewards);
    }

    #[test]
    fn evaluation_counts_episodes() {
        let env = EnvConfig {
            agents: 2,
            room: Room::cube(4.0),
            episode_seconds: 0.1,
            ..Default::default()
        };
        let eps = evaluate_policy(&tiny(), env, QuadParams::default(), ScenarioConfig::default(), 3, 1).unwrap();
        assert_eq!(eps.len(), 3);
        assert!(eps.iter().all(|e| e.steps == 10));
    }

    #[test]
    fn trace_has_one_row_per_agent_step() {
        let env = EnvConfig {
            agents: 2,
            room: Room::cube(4.0),
            episode_seconds: 0.1,
            ..Default::default()
        };
        let rows = trace_episode(&tiny(), env, QuadParams::default(), ScenarioConfig::default(), 1).unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[19].agent, 1);
        assert!((rows[19].t - 0.1).abs() < 1e-12);
    }
}
