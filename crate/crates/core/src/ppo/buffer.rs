use super::{gae, PpoError, Result};

/// Transitions of `sequences` parallel streams over `length` steps, stored
/// time-major: entry `t · sequences + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer<O> {
    pub sequences: usize,
    pub length: usize,
    pub obs: Vec<O>,
    /// Pre-clip Gaussian samples.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state after the last step of each sequence.
    pub last_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl<O> RolloutBuffer<O> {
    pub fn new(sequences: usize, length: usize) -> Self {
        let cap = sequences * length;
        Self {
            sequences,
            length,
            obs: Vec::with_capacity(cap),
            actions: Vec::with_capacity(cap),
            log_probs: Vec::with_capacity(cap),
            rewards: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            dones: Vec::with_capacity(cap),
            last_values: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.sequences * self.length
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity() && self.last_values.len() == self.sequences
    }

    pub fn push(&mut self, obs: O, action: Vec<f64>, log_prob: f64, reward: f64, value: f64, done: bool) {
        assert!(self.len() < self.capacity(), "rollout buffer overflow");
        self.obs.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn all_finite(&self) -> bool {
        let scalars = self
            .log_probs
            .iter()
            .chain(&self.rewards)
            .chain(&self.values)
            .chain(&self.last_values)
            .chain(&self.advantages)
            .chain(&self.returns);
        scalars.chain(self.actions.iter().flatten()).all(|v| v.is_finite())
    }

    /// Runs GAE down every sequence. Needs a full buffer.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        if !self.is_full() {
            return Err(PpoError::BufferNotFull {
                filled: self.len(),
                capacity: self.capacity(),
            });
        }
        let (s_n, t_n) = (self.sequences, self.length);
        self.advantages = vec![0.0; s_n * t_n];
        self.returns = vec![0.0; s_n * t_n];
        for s in 0..s_n {
            let idx: Vec<usize> = (0..t_n).map(|t| t * s_n + s).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let mut v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            v.push(self.last_values[s]);
            let (a, ret) = gae(&r, &v, &d, gamma, lambda)?;
            for (k, &i) in idx.iter().enumerate() {
                self.advantages[i] = a[k];
                self.returns[i] = ret[k];
            }
        }
        Ok(())
    }
}

/// Shifts and scales to zero mean and unit variance in place. A constant
/// batch is only centered.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if std > 1e-12 {
            *a /= std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_arithmetic() {
        let mut b: RolloutBuffer<()> = RolloutBuffer::new(2 * 3, 128);
        for _ in 0..768 {
            b.push((), vec![0.0; 4], 0.0, 0.0, 0.0, false);
        }
        assert_eq!(b.len(), 768);
        assert!(!b.is_full());
        b.last_values = vec![0.0; 6];
        assert!(b.is_full());
        b.compute_advantages(0.99, 0.95).unwrap();
        assert!(b.advantages.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn partial_buffer_is_rejected() {
        let mut b: RolloutBuffer<()> = RolloutBuffer::new(2, 4);
        b.push((), vec![], 0.0, 1.0, 0.0, false);
        assert!(matches!(b.compute_advantages(0.99, 0.95), Err(PpoError::BufferNotFull { .. })));
    }

    #[test]
    fn sequences_are_independent() {
        let mut b: RolloutBuffer<()> = RolloutBuffer::new(2, 3);
        for _ in 0..3 {
            b.push((), vec![], 0.0, 1.0, 0.0, false);
            b.push((), vec![], 0.0, 0.0, 0.0, false);
        }
        b.last_values = vec![0.0, 0.0];
        b.compute_advantages(0.99, 1.0).unwrap();
        assert!((b.advantages[0] - 2.9701).abs() < 1e-12);
        assert_eq!(b.advantages[1], 0.0);
    }

    #[test]
    fn normalization_moments() {
        let mut a: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.3 - 4.0).collect();
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() <= 1e-9);
        assert!((std - 1.0).abs() <= 1e-6);
    }
}
