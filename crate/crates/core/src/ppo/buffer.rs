//! Trajectory storage for one worker. Episodes are contiguous; advantages
//! must be computed before the buffer is consumed by the updater.

use super::gae::compute_gae;
use super::PpoError;

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    advantages_ready: bool,
}

impl RolloutBuffer {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            obs: Vec::with_capacity(capacity),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            advantages: Vec::new(),
            returns: Vec::new(),
            advantages_ready: false,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        self.obs.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
        self.advantages.clear();
        self.returns.clear();
        self.advantages_ready = false;
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: Vec<f64>,
        action: Vec<f64>,
        log_prob: f64,
        reward: f64,
        value: f64,
        done: bool,
    ) {
        self.obs.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    /// Compute advantages and return targets; `bootstrap` is the value
    /// estimate for the state after the last stored step.
    pub fn finish(&mut self, bootstrap: f64, gamma: f64, lambda: f64) -> Result<(), PpoError> {
        let (adv, ret) =
            compute_gae(&self.rewards, &self.values, &self.dones, bootstrap, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        self.advantages_ready = true;
        Ok(())
    }

    pub fn advantages_ready(&self) -> bool {
        self.advantages_ready
    }

    /// Move another worker's trajectories onto the end of this buffer.
    /// Both sides must have advantages computed, episode boundaries stay
    /// intact.
    pub fn absorb(&mut self, mut other: RolloutBuffer) {
        assert!(other.advantages_ready, "absorb requires finished buffers");
        self.obs.append(&mut other.obs);
        self.actions.append(&mut other.actions);
        self.log_probs.append(&mut other.log_probs);
        self.rewards.append(&mut other.rewards);
        self.values.append(&mut other.values);
        self.dones.append(&mut other.dones);
        self.advantages.append(&mut other.advantages);
        self.returns.append(&mut other.returns);
        self.advantages_ready = true;
    }
}
