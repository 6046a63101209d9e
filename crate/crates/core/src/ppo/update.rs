//! The PPO update: clipped surrogate objective, value regression, entropy
//! bonus, advantage normalization, exact gradients through the Gaussian
//! head, global gradient-norm clipping and epoch/minibatch scheduling.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::buffer::RolloutBuffer;
use super::{Adam, PpoConfig, PpoError};
use crate::nn::{PolicyValueNet, Tape};

/// Probability ratio `π_new(a|s) / π_old(a|s)` from log densities.
#[inline]
pub fn ratio(log_prob_new: f64, log_prob_old: f64) -> f64 {
    (log_prob_new - log_prob_old).exp()
}

/// Per-sample pessimistic surrogate
/// `min(r·Â, clip(r, 1−ε, 1+ε)·Â)`; training maximizes its mean.
#[inline]
pub fn clipped_objective(r: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = r.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    (r * advantage).min(clipped)
}

/// In-place normalization to zero mean and unit variance.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len().max(1) as f64;
    let mean: f64 = advantages.iter().sum::<f64>() / n;
    let var: f64 = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in advantages.iter_mut() {
        *a = (*a - mean) / std;
    }
}

/// Aggregate statistics over one update call.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Borrowed view of the samples feeding one minibatch gradient.
pub struct MiniBatchView<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [Vec<f64>],
    pub log_probs_old: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

/// Loss value and gradient of the full PPO objective over a minibatch:
/// `−mean(surrogate) + c_v·MSE(V, R) − c_e·entropy`. Gradients accumulate
/// into `grads` (zeroed here). Returns per-minibatch statistics.
pub fn minibatch_gradient(
    net: &PolicyValueNet,
    batch: &MiniBatchView,
    cfg: &PpoConfig,
    grads: &mut [f64],
) -> Result<(f64, UpdateStats), PpoError> {
    grads.fill(0.0);
    let b = batch.obs.len();
    assert!(b > 0, "empty minibatch");
    let inv_b = 1.0 / b as f64;
    let act_dim = net.act_dim();
    let value_offset = net.value_offset();
    let log_std_offset = net.log_std_offset();

    let mut policy_tape = Tape::default();
    let mut value_tape = Tape::default();
    let mut surrogate_sum = 0.0;
    let mut value_loss_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped_count = 0usize;

    let std: Vec<f64> = net.log_std.iter().map(|l| l.exp()).collect();
    // State-independent log-std makes the entropy identical per sample.
    let entropy: f64 = net
        .log_std
        .iter()
        .map(|l| 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln()) + l)
        .sum();

    let mut d_mean = vec![0.0; act_dim];
    let mut d_value = [0.0];
    for i in 0..b {
        let mean = net.policy.forward(&batch.obs[i], &mut policy_tape).to_vec();
        let value = net.value.forward(&batch.obs[i], &mut value_tape)[0];

        // Diagonal Gaussian log density and its derivatives.
        let mut lp = 0.0;
        let mut z = vec![0.0; act_dim];
        for j in 0..act_dim {
            z[j] = (batch.actions[i][j] - mean[j]) / std[j];
            lp += -0.5 * z[j] * z[j] - net.log_std[j] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        let r = ratio(lp, batch.log_probs_old[i]);
        let adv = batch.advantages[i];
        surrogate_sum += clipped_objective(r, adv, cfg.clip_epsilon);
        kl_sum += batch.log_probs_old[i] - lp;
        if (r - 1.0).abs() > cfg.clip_epsilon {
            clipped_count += 1;
        }

        // The min picks the unclipped branch when r·adv is the smaller
        // value; only that branch has a nonzero derivative in r.
        let unclipped = r * adv;
        let clipped = r.clamp(1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * adv;
        let d_lp = if unclipped <= clipped {
            // d(−mean surrogate)/d lp = −(1/B)·adv·r
            -inv_b * adv * r
        } else {
            0.0
        };

        for j in 0..act_dim {
            // ∂lp/∂mean_j = z_j/σ_j.
            d_mean[j] = d_lp * z[j] / std[j];
            // ∂lp/∂log_std_j = z_j² − 1.
            grads[log_std_offset + j] += d_lp * (z[j] * z[j] - 1.0);
        }
        net.policy.backward(&policy_tape, &d_mean, &mut grads[..value_offset], None);

        let err = value - batch.returns[i];
        value_loss_sum += err * err;
        d_value[0] = cfg.value_coef * 2.0 * err * inv_b;
        net.value.backward(&value_tape, &d_value, &mut grads[value_offset..log_std_offset], None);
    }

    // Entropy bonus gradient: ∂H/∂log_std_j = 1 per sample.
    if cfg.entropy_coef != 0.0 {
        for j in 0..act_dim {
            grads[log_std_offset + j] -= cfg.entropy_coef;
        }
    }

    let policy_loss = -surrogate_sum * inv_b;
    let value_loss = value_loss_sum * inv_b;
    let total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;
    if !total.is_finite() {
        return Err(PpoError::NonFiniteLoss {
            iteration: 0,
            detail: format!("policy {policy_loss}, value {value_loss}"),
        });
    }
    let stats = UpdateStats {
        policy_loss,
        value_loss,
        entropy,
        clip_fraction: clipped_count as f64 / b as f64,
        approx_kl: kl_sum * inv_b,
        grad_norm: 0.0,
        minibatches: 1,
    };
    Ok((total, stats))
}

/// One full PPO update over a finished buffer: `epochs` passes of shuffled
/// minibatches, Adam steps at the given learning rate, gradient-norm
/// clipping. Advantages must already be normalized by the caller.
pub fn update(
    net: &mut PolicyValueNet,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, PpoError> {
    assert!(buffer.advantages_ready(), "advantages must be computed before the update");
    let n = buffer.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = vec![0.0; net.param_count()];
    let mut agg = UpdateStats::default();
    let mut scratch_obs: Vec<Vec<f64>> = Vec::new();
    let mut scratch_act: Vec<Vec<f64>> = Vec::new();
    let mut scratch_lp: Vec<f64> = Vec::new();
    let mut scratch_adv: Vec<f64> = Vec::new();
    let mut scratch_ret: Vec<f64> = Vec::new();

    for _epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            scratch_obs.clear();
            scratch_act.clear();
            scratch_lp.clear();
            scratch_adv.clear();
            scratch_ret.clear();
            for &i in chunk {
                scratch_obs.push(buffer.obs[i].clone());
                scratch_act.push(buffer.actions[i].clone());
                scratch_lp.push(buffer.log_probs[i]);
                scratch_adv.push(buffer.advantages[i]);
                scratch_ret.push(buffer.returns[i]);
            }
            let view = MiniBatchView {
                obs: &scratch_obs,
                actions: &scratch_act,
                log_probs_old: &scratch_lp,
                advantages: &scratch_adv,
                returns: &scratch_ret,
            };
            let (_, stats) = minibatch_gradient(net, &view, cfg, &mut grads)?;

            let norm: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(PpoError::NonFiniteLoss { iteration: 0, detail: format!("grad norm {norm}") });
            }
            if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
                let scale = cfg.grad_clip / norm;
                for g in grads.iter_mut() {
                    *g *= scale;
                }
            }
            adam.step(net, &grads, lr);

            agg.policy_loss += stats.policy_loss;
            agg.value_loss += stats.value_loss;
            agg.entropy += stats.entropy;
            agg.clip_fraction += stats.clip_fraction;
            agg.approx_kl += stats.approx_kl;
            agg.grad_norm += norm;
            agg.minibatches += 1;
        }
    }
    let m = agg.minibatches.max(1) as f64;
    agg.policy_loss /= m;
    agg.value_loss /= m;
    agg.entropy /= m;
    agg.clip_fraction /= m;
    agg.approx_kl /= m;
    agg.grad_norm /= m;
    Ok(agg)
}
