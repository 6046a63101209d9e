//! Policy and value function approximators: two MLPs sharing the hidden
//! architecture, a diagonal-Gaussian action head with learned,
//! state-independent log standard deviations, and the combined flat
//! parameter view the optimizer works on.

use rand::RngExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::{Mlp, Tape};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Diagonal Gaussian over actions.
#[derive(Debug, Clone)]
pub struct GaussianDist {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl GaussianDist {
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        assert_eq!(action.len(), self.mean.len());
        let mut lp = 0.0;
        for ((a, m), s) in action.iter().zip(&self.mean).zip(&self.std) {
            let z = (a - m) / s;
            lp += -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        lp
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| m + s * standard_normal(rng))
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        self.std
            .iter()
            .map(|s| 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln()) + s.ln())
            .sum()
    }
}

/// Box-Muller draw; two uniforms per call keeps the stream deterministic.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Policy network, value network and the action log-std vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyValueNet {
    pub policy: Mlp,
    pub value: Mlp,
    pub log_std: Vec<f64>,
}

impl PolicyValueNet {
    /// Xavier-uniform initialization. The policy output layer gets a small
    /// gain so initial action offsets are near zero; log-std starts at
    /// `log_std_init` (a standard deviation of one at zero).
    pub fn init<R: rand::Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        rng: &mut R,
        log_std_init: f64,
    ) -> Self {
        let mut policy_dims = vec![obs_dim];
        policy_dims.extend_from_slice(hidden);
        policy_dims.push(act_dim);
        let mut value_dims = vec![obs_dim];
        value_dims.extend_from_slice(hidden);
        value_dims.push(1);
        Self {
            policy: Mlp::xavier(&policy_dims, rng, 0.01),
            value: Mlp::xavier(&value_dims, rng, 1.0),
            log_std: vec![log_std_init.clamp(LOG_STD_MIN, LOG_STD_MAX); act_dim],
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.policy.param_count() + self.value.param_count() + self.log_std.len()
    }

    /// Flat gradient layout: policy parameters, value parameters, log-std.
    pub fn log_std_offset(&self) -> usize {
        self.policy.param_count() + self.value.param_count()
    }

    pub fn value_offset(&self) -> usize {
        self.policy.param_count()
    }

    pub fn apply_update(&mut self, f: &mut impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        for p in self.policy.params_mut() {
            f(idx, p);
            idx += 1;
        }
        for p in self.value.params_mut() {
            f(idx, p);
            idx += 1;
        }
        for p in self.log_std.iter_mut() {
            f(idx, p);
            idx += 1;
            *p = p.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// Action distribution and value estimate for one observation.
    pub fn forward(
        &self,
        obs: &[f64],
        policy_tape: &mut Tape,
        value_tape: &mut Tape,
    ) -> Result<(GaussianDist, f64), NetError> {
        if obs.len() != self.obs_dim() {
            return Err(NetError::DimensionMismatch { expected: self.obs_dim(), got: obs.len() });
        }
        let mean = self.policy.forward(obs, policy_tape).to_vec();
        let value = self.value.forward(obs, value_tape)[0];
        let std = self.log_std.iter().map(|l| l.exp()).collect();
        Ok((GaussianDist { mean, std }, value))
    }

    /// Deterministic mean action (evaluation).
    pub fn mean_action(&self, obs: &[f64], tape: &mut Tape) -> Result<Vec<f64>, NetError> {
        if obs.len() != self.obs_dim() {
            return Err(NetError::DimensionMismatch { expected: self.obs_dim(), got: obs.len() });
        }
        Ok(self.policy.forward(obs, tape).to_vec())
    }
}
