//! Action processing between the policy and the joints: second-order
//! low-pass filtering at the control rate, linear interpolation across
//! physics substeps, and the clipped PD torque law
//! `τ = clip(k_p·(a − p) − k_v·ṗ, −τ̂, τ̂)`.

use serde::{Deserialize, Serialize};

/// Joint target positions in actuated-joint order, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Action(pub Vec<f64>);

impl Action {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// PD gains and filter settings. The gains follow the exoskeleton
/// controller: k_p = 900, k_v = 40, 100 N·m torque bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PdConfig {
    pub kp: f64,
    pub kv: f64,
    pub torque_limit: f64,
    /// Low-pass cutoff for the action filter, Hz, applied at the control
    /// rate. The filter order is fixed at two.
    pub filter_cutoff_hz: f64,
    /// Control (policy output) rate, Hz.
    pub control_rate_hz: f64,
}

impl Default for PdConfig {
    fn default() -> Self {
        Self { kp: 900.0, kv: 40.0, torque_limit: 100.0, filter_cutoff_hz: 4.0, control_rate_hz: 30.0 }
    }
}

/// Discrete second-order low-pass filter (critically damped, bilinear
/// transform) applied per action channel at the control rate. DC gain is
/// exactly one, so a held input converges to itself.
#[derive(Debug, Clone)]
pub struct ActionFilter {
    b: [f64; 3],
    a: [f64; 2],
    x1: Vec<f64>,
    x2: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
}

impl ActionFilter {
    pub fn new(cfg: &PdConfig, dim: usize) -> Self {
        let (b, a) = critically_damped_biquad(cfg.filter_cutoff_hz, cfg.control_rate_hz);
        Self { b, a, x1: vec![0.0; dim], x2: vec![0.0; dim], y1: vec![0.0; dim], y2: vec![0.0; dim] }
    }

    /// Reset to steady state at `pose`, as done at episode start: a constant
    /// input equal to `pose` would leave the output unchanged.
    pub fn reset(&mut self, pose: &Action) {
        for k in 0..self.x1.len() {
            self.x1[k] = pose.0[k];
            self.x2[k] = pose.0[k];
            self.y1[k] = pose.0[k];
            self.y2[k] = pose.0[k];
        }
    }

    /// Filter one control-rate sample.
    pub fn apply(&mut self, raw: &Action) -> Action {
        assert_eq!(raw.dim(), self.x1.len(), "action dimension mismatch");
        let mut out = vec![0.0; raw.dim()];
        for k in 0..raw.dim() {
            let x = raw.0[k];
            let y = self.b[0] * x + self.b[1] * self.x1[k] + self.b[2] * self.x2[k]
                - self.a[0] * self.y1[k]
                - self.a[1] * self.y2[k];
            self.x2[k] = self.x1[k];
            self.x1[k] = x;
            self.y2[k] = self.y1[k];
            self.y1[k] = y;
            out[k] = y;
        }
        Action(out)
    }
}

/// Coefficients of `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²)/(1 + a1 z⁻¹ + a2 z⁻²)`
/// for a double real pole at the prewarped cutoff.
fn critically_damped_biquad(cutoff_hz: f64, rate_hz: f64) -> ([f64; 3], [f64; 2]) {
    let t = 1.0 / rate_hz;
    let w0 = 2.0 * std::f64::consts::PI * cutoff_hz;
    // Bilinear transform of w0² / (s + w0)².
    let k = 2.0 / t;
    let d0 = (k + w0) * (k + w0);
    let d1 = 2.0 * (w0 - k) * (w0 + k);
    let d2 = (w0 - k) * (w0 - k);
    let b = [w0 * w0 / d0, 2.0 * w0 * w0 / d0, w0 * w0 / d0];
    let a = [d1 / d0, d2 / d0];
    (b, a)
}

/// Per-channel linear interpolation between two filtered actions. Substep
/// `k` of `n` uses `alpha = (k + 1)/n` so the newest action is reached
/// exactly at the next control tick.
pub fn interpolate(prev: &Action, next: &Action, alpha: f64) -> Action {
    assert!((0.0..=1.0).contains(&alpha), "alpha must be in [0, 1]");
    assert_eq!(prev.dim(), next.dim());
    Action(
        prev.0
            .iter()
            .zip(&next.0)
            .map(|(p, n)| (1.0 - alpha) * p + alpha * n)
            .collect(),
    )
}

/// Clipped PD torque, element-wise over the joints.
pub fn pd_torque(cfg: &PdConfig, target: &[f64], position: &[f64], velocity: &[f64]) -> Vec<f64> {
    target
        .iter()
        .zip(position)
        .zip(velocity)
        .map(|((a, p), v)| (cfg.kp * (a - p) - cfg.kv * v).clamp(-cfg.torque_limit, cfg.torque_limit))
        .collect()
}
