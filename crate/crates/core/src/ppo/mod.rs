//! Proximal policy optimization: rollout collection across parallel
//! workers, generalized advantage estimation, the clipped surrogate
//! objective, value regression, and Adam updates with a linearly decayed
//! learning rate over the sample budget.

mod adam;
mod buffer;
mod gae;
mod train;
pub mod update;

pub use adam::Adam;
pub use buffer::RolloutBuffer;
pub use gae::compute_gae;
pub use train::{train, IterationLog, PolicyDriver, TrainOutput, TrainProgress};
pub use update::{clipped_objective, minibatch_gradient, normalize_advantages, ratio, update, MiniBatchView, UpdateStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: u64, detail: String },
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Checkpoint(#[from] crate::nn::CheckpointError),
}

/// Training hyperparameters. Defaults mirror the trained controller:
/// discount 0.99, clip 0.2, 10 epochs of 128-sample minibatches drawn from
/// a 2048-step buffer, Adam at 1e-4 decaying linearly to zero over the
/// sample budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    /// Total sample budget; the learning rate reaches zero here.
    pub sample_budget: u64,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub grad_clip: f64,
    /// Steps collected per iteration across all workers.
    pub buffer_size: usize,
    pub workers: usize,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    pub normalize_obs: bool,
    /// Iterations between checkpoints; the final checkpoint always exists.
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            clip_epsilon: 0.2,
            epochs: 10,
            minibatch: 128,
            learning_rate: 1e-4,
            sample_budget: 20_000_000,
            gae_lambda: 0.95,
            value_coef: 0.5,
            entropy_coef: 0.0,
            grad_clip: 0.5,
            buffer_size: 2048,
            workers: 4,
            hidden: vec![256, 256, 128],
            log_std_init: 0.0,
            normalize_obs: true,
            checkpoint_every: 200,
            seed: 0,
        }
    }
}

impl PpoConfig {
    /// Small-network, small-budget preset for desk-scale runs and the
    /// training smoke test. A mild entropy bonus keeps exploration from
    /// collapsing on the short budget.
    pub fn desk() -> Self {
        Self {
            sample_budget: 2_000_000,
            hidden: vec![64, 64],
            log_std_init: -1.0,
            learning_rate: 3e-4,
            entropy_coef: 0.003,
            checkpoint_every: 200,
            ..Self::default()
        }
    }

    /// Linearly decayed learning rate after `samples` collected samples.
    pub fn lr_at(&self, samples: u64) -> f64 {
        let frac = 1.0 - samples as f64 / self.sample_budget as f64;
        self.learning_rate * frac.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_decays_linearly_to_zero() {
        let cfg = PpoConfig { learning_rate: 1e-4, sample_budget: 20_000_000, ..Default::default() };
        assert_eq!(cfg.lr_at(0), 1e-4);
        assert!((cfg.lr_at(10_000_000) - 0.5e-4).abs() < 1e-18);
        assert_eq!(cfg.lr_at(20_000_000), 0.0);
        assert_eq!(cfg.lr_at(25_000_000), 0.0);
    }
}
