use super::{PpoError, Result};

/// Generalized advantage estimates and returns for one sequence.
///
/// `values` holds `V(s_0) … V(s_T)`, one more entry than `rewards`; the last
/// is the bootstrap value after the final step. A done flag at `t` stops
/// both the bootstrap and the recursion at `t`.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n + 1 || dones.len() != n {
        return Err(PpoError::LengthMismatch {
            rewards: n,
            values: values.len(),
            dones: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let (a, r) = gae(&[1.0], &[0.0, 0.0], &[false], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn geometric_sum() {
        let (a, _) = gae(&[1.0; 3], &[0.0; 4], &[false; 3], 0.99, 1.0).unwrap();
        let by_hand = 1.0 + 0.99 + 0.99 * 0.99;
        assert!((a[0] - by_hand).abs() < 1e-15);
        assert!((a[0] - 2.9701).abs() < 1e-12);
    }

    #[test]
    fn done_blocks_bootstrap() {
        let values = [0.5, -0.2, 3.0, 7.0];
        let rewards = [0.3, 1.0, -2.0];
        let (a, _) = gae(&rewards, &values, &[false, true, false], 0.9, 0.8).unwrap();
        assert_eq!(a[1], rewards[1] - values[1]);
    }

    #[test]
    fn zero_rewards_and_values_give_zero() {
        let (a, r) = gae(&[0.0; 5], &[0.0; 6], &[false, false, true, false, false], 0.99, 0.95).unwrap();
        assert!(a.iter().chain(&r).all(|&x| x == 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(gae(&[1.0; 3], &[0.0; 3], &[false; 3], 0.99, 0.95).is_err());
        assert!(gae(&[1.0; 3], &[0.0; 4], &[false; 2], 0.99, 0.95).is_err());
    }
}
