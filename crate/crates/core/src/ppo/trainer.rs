use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{collect, ppo_update, Result, UpdateStats, Worker};
use crate::config::RunConfig;
use crate::nn::AdamState;
use crate::policy::{save_policy, Policy};
use crate::swarm::{summarize, SwarmEnv};

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    /// Agent transitions collected so far.
    pub steps: u64,
    /// Mean per-step reward of the rollout times the episode length.
    pub mean_episode_reward: f64,
    /// Mean distance to target over the rollout.
    pub mean_distance: f64,
    pub episodes_finished: usize,
    /// Mean per-agent return of episodes that finished in this rollout.
    pub finished_episode_reward: Option<f64>,
    pub finished_final_distance: Option<f64>,
    pub diverged: usize,
    #[serde(flatten)]
    pub stats: UpdateStats,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config: RunConfig,
    pub updates: usize,
    pub steps: u64,
    pub interrupted: bool,
    pub first_reward: Option<f64>,
    /// Mean of `mean_episode_reward` over the last ten updates.
    pub final_reward: Option<f64>,
    pub final_distance: Option<f64>,
    pub parameters: usize,
    pub seconds: f64,
}

/// Owns the policy, optimizer and worker environments. Workers only see
/// the policy between updates.
pub struct Trainer {
    pub config: RunConfig,
    pub policy: Policy,
    pub adam: AdamState,
    pub workers: Vec<Worker>,
    pub steps: u64,
    pub history: Vec<UpdateRecord>,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.train.validate()?;
        let policy = Policy::new(config.policy.clone(), config.train.seed)?;
        Self::with_policy(config, policy)
    }

    /// Continues from existing weights with a fresh optimizer.
    pub fn with_policy(config: RunConfig, policy: Policy) -> Result<Self> {
        config.train.validate()?;
        let mut seeds = ChaCha8Rng::seed_from_u64(config.train.seed);
        let workers = (0..config.train.workers)
            .map(|_| -> Result<Worker> {
                let env = SwarmEnv::new(config.env, config.quad.clone(), config.scenario, seeds.gen())?;
                Ok(Worker::new(env, seeds.gen()))
            })
            .collect::<Result<Vec<_>>>()?;
        let rng = ChaCha8Rng::seed_from_u64(seeds.gen());
        Ok(Self {
            adam: AdamState::new(&policy.params),
            policy,
            workers,
            steps: 0,
            history: Vec::new(),
            rng,
            config,
        })
    }

    pub fn updates(&self) -> usize {
        self.history.len()
    }

    pub fn finished(&self) -> bool {
        self.steps >= self.config.train.total_steps
    }

    /// Collects one rollout and runs one PPO update on it.
    pub fn update(&mut self) -> Result<UpdateRecord> {
        let start = Instant::now();
        let t = &self.config.train;
        let mut buf = collect(&self.policy, &mut self.workers, t.rollout, false)?;
        buf.compute_advantages(t.gamma, t.gae_lambda)?;
        let stats = ppo_update(&mut self.policy, &mut self.adam, &buf, t, &mut self.rng)?;
        self.steps += buf.len() as u64;

        let episodes: Vec<_> = self.workers.iter_mut().flat_map(Worker::drain_finished).collect();
        let diverged = self.workers.iter_mut().map(|w| std::mem::take(&mut w.diverged)).sum();
        let finished = summarize(&episodes, self.config.env.success_radius).ok();
        let n = buf.len().max(1) as f64;
        let episode_steps = self.config.env.episode_steps(&self.config.quad) as f64;
        let record = UpdateRecord {
            update: self.history.len() + 1,
            steps: self.steps,
            mean_episode_reward: buf.rewards.iter().sum::<f64>() / n * episode_steps,
            mean_distance: buf.obs.iter().map(|g| g.ego_state().distance_to_target()).sum::<f64>() / n,
            episodes_finished: episodes.len(),
            finished_episode_reward: finished.map(|m| m.mean_reward_per_agent),
            finished_final_distance: finished.map(|m| m.mean_final_distance),
            diverged,
            stats,
            seconds: start.elapsed().as_secs_f64(),
        };
        self.history.push(record.clone());
        Ok(record)
    }

    /// Trains until the step budget is spent or `stop` is raised. With an
    /// output directory, writes `metrics.jsonl`, periodic checkpoints under
    /// `checkpoints/`, the final `policy.bin` and `summary.json`. A failed
    /// update returns its error and leaves earlier checkpoints in place.
    pub fn run(&mut self, out: Option<&Path>, stop: &AtomicBool) -> Result<TrainSummary> {
        self.run_with(out, stop, |_| {})
    }

    /// [`Trainer::run`] with a callback after every update.
    pub fn run_with(&mut self, out: Option<&Path>, stop: &AtomicBool, mut on_update: impl FnMut(&UpdateRecord)) -> Result<TrainSummary> {
        let start = Instant::now();
        let mut metrics = match out {
            Some(dir) => {
                fs::create_dir_all(dir.join("checkpoints"))?;
                Some(BufWriter::new(File::create(dir.join("metrics.jsonl"))?))
            }
            None => None,
        };
        let mut interrupted = false;
        while !self.finished() {
            if stop.load(Ordering::SeqCst) {
                interrupted = true;
                break;
            }
            let rec = self.update()?;
            on_update(&rec);
            if let (Some(w), Some(dir)) = (metrics.as_mut(), out) {
                serde_json::to_writer(&mut *w, &rec)?;
                writeln!(w)?;
                w.flush()?;
                if rec.update % self.config.train.checkpoint_every == 0 {
                    self.save(&checkpoint_path(dir, rec.update))?;
                }
            }
        }
        let summary = self.summary(interrupted, start.elapsed().as_secs_f64());
        if let Some(dir) = out {
            self.save(&dir.join("policy.bin"))?;
            fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        }
        Ok(summary)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_policy(&self.policy, path)?;
        Ok(())
    }

    pub fn summary(&self, interrupted: bool, seconds: f64) -> TrainSummary {
        let h = &self.history;
        let tail = &h[h.len().saturating_sub(10)..];
        let avg = |f: &dyn Fn(&UpdateRecord) -> f64| (!tail.is_empty()).then(|| tail.iter().map(f).sum::<f64>() / tail.len() as f64);
        TrainSummary {
            config: self.config.clone(),
            updates: h.len(),
            steps: self.steps,
            interrupted,
            first_reward: h.first().map(|r| r.mean_episode_reward),
            final_reward: avg(&|r| r.mean_episode_reward),
            final_distance: avg(&|r| r.mean_distance),
            parameters: self.policy.params.num_scalars(),
            seconds,
        }
    }
}

pub fn checkpoint_path(dir: &Path, update: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("update_{update:06}.bin"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swarm::Room;

    fn tiny() -> RunConfig {
        let mut c = RunConfig::default();
        c.env.agents = 2;
        c.env.room = Room::cube(4.0);
        c.env.episode_seconds = 0.3;
        c.policy.layers = 1;
        c.policy.scalars = 4;
        c.policy.vectors = 3;
        c.policy.key_dim = 4;
        c.policy.ff_hidden = 8;
        c.policy.trunk = [8, 8, 8, 8];
        c.policy.out_scalars = 5;
        c.policy.head_hidden = 8;
        c.policy.critic_hidden = 8;
        c.train.workers = 2;
        c.train.rollout = 16;
        c.train.batch_size = 32;
        c.train.epochs = 2;
        c.train.total_steps = 200;
        c.train.checkpoint_every = 2;
        c
    }

    #[test]
    fn single_worker_runs_repeat_exactly() {
        let run = || {
            let mut c = tiny();
            c.train.workers = 1;
            let mut t = Trainer::new(c).unwrap();
            t.run(None, &AtomicBool::new(false)).unwrap();
            (t.history.iter().map(|r| (r.mean_episode_reward, r.stats)).collect::<Vec<_>>(), t.policy.params)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Trainer::new(tiny()).unwrap();
        let s = t.run(Some(dir.path()), &AtomicBool::new(false)).unwrap();
        assert_eq!(s.updates, 4);
        assert!(s.steps >= 200);
        let lines = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 4);
        for l in lines.lines() {
            let r: UpdateRecord = serde_json::from_str(l).unwrap();
            assert!((0.0..=1.0).contains(&r.stats.clip_fraction));
        }
        assert!(checkpoint_path(dir.path(), 2).exists());
        assert!(dir.path().join("policy.bin").exists());
        let s2: TrainSummary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(s2.config, tiny());
    }

    #[test]
    fn stop_flag_halts_before_first_update() {
        let mut t = Trainer::new(tiny()).unwrap();
        let s = t.run(None, &AtomicBool::new(true)).unwrap();
        assert!(s.interrupted);
        assert_eq!(s.updates, 0);
    }
}
