//! Generalized advantage estimation.

use super::PpoError;

/// Backward recursion `δ_t = r_t + γ·V_{t+1}·(1−done_t) − V_t`,
/// `Â_t = δ_t + γλ(1−done_t)·Â_{t+1}`; returns are `Â + V`. The bootstrap
/// value stands in for `V` after the final stored step when the episode
/// was truncated rather than finished.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(PpoError::LengthMismatch(format!(
            "rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        acc = delta + gamma * lambda * not_done * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_one_equals_discounted_return_minus_baseline() {
        // Hand-built five-step episode ending in done.
        let rewards = [1.0, 0.5, -0.25, 2.0, 0.75];
        let values = [0.3, -0.1, 0.4, 0.2, 0.6];
        let dones = [false, false, false, false, true];
        let gamma = 0.97;
        let (adv, ret) = compute_gae(&rewards, &values, &dones, 99.0, gamma, 1.0).unwrap();
        for t in 0..5 {
            let mut discounted = 0.0;
            for (k, r) in rewards[t..].iter().enumerate() {
                discounted += gamma.powi(k as i32) * r;
            }
            assert!((adv[t] - (discounted - values[t])).abs() < 1e-10, "t={t}");
            assert!((ret[t] - discounted).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn zero_rewards_zero_values_zero_advantages() {
        let (adv, ret) =
            compute_gae(&[0.0; 7], &[0.0; 7], &[false; 7], 0.0, 0.99, 0.95).unwrap();
        assert!(adv.iter().all(|a| *a == 0.0));
        assert!(ret.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn single_terminal_step_delta() {
        let (adv, _) = compute_gae(&[1.0], &[0.5], &[true], 123.0, 0.99, 0.95).unwrap();
        assert!((adv[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn truncated_tail_uses_bootstrap() {
        let (adv, _) = compute_gae(&[1.0], &[0.5], &[false], 2.0, 0.99, 0.95).unwrap();
        // δ = 1 + 0.99·2 − 0.5 = 2.48.
        assert!((adv[0] - 2.48).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(matches!(
            compute_gae(&[1.0, 2.0], &[0.0], &[false, false], 0.0, 0.99, 0.95),
            Err(PpoError::LengthMismatch(_))
        ));
    }
}
