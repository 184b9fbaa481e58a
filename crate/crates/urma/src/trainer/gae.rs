//! Generalized advantage estimation.

use crate::trainer::TrainerError;

/// Standard recursive GAE over one trajectory segment. `dones[t]` marks
/// a terminal transition (next value treated as zero and the
/// exponential accumulator reset); `bootstrap` is the critic value of
/// the state after the final step, used when the segment is truncated
/// rather than terminated.
///
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrainerError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(TrainerError::LengthMismatch {
            rewards: n,
            values: values.len(),
            dones: dones.len(),
        });
    }
    let mut advantages = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let (next_value, next_nonterminal) = if dones[t] {
            (0.0, 0.0)
        } else if t == n - 1 {
            (bootstrap, 1.0)
        } else {
            (values[t + 1], 1.0)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        gae = delta + gamma * lambda * next_nonterminal * gae;
        advantages[t] = gae;
    }
    let returns = advantages
        .iter()
        .zip(values.iter())
        .map(|(a, v)| a + v)
        .collect();
    Ok((advantages, returns))
}

/// GAE with explicit per-step bootstrap values for truncated episodes
/// (time limits inside the segment). `timeout_values[t]` holds the
/// critic value of the post-step observation when step `t` ended an
/// episode by truncation rather than a fall.
pub fn compute_gae_truncated(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    timeout_values: &[Option<f64>],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrainerError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n || timeout_values.len() != n {
        return Err(TrainerError::LengthMismatch {
            rewards: n,
            values: values.len(),
            dones: dones.len(),
        });
    }
    let mut advantages = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let (next_value, next_nonterminal) = if dones[t] {
            // a truncated episode still bootstraps its final state
            (timeout_values[t].unwrap_or(0.0), 0.0)
        } else if t == n - 1 {
            (bootstrap, 1.0)
        } else {
            (values[t + 1], 1.0)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        gae = delta + gamma * lambda * next_nonterminal * gae;
        advantages[t] = gae;
    }
    let returns = advantages
        .iter()
        .zip(values.iter())
        .map(|(a, v)| a + v)
        .collect();
    Ok((advantages, returns))
}
