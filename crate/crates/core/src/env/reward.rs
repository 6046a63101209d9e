//! The seven-term imitation-and-balance reward.
//!
//! Each term is `exp(−σ·error²)` in [0, 1]; the total is the weighted sum.
//! The CoP term is the branch function: `exp(−σ_cop·D²)` while the CoP is
//! inside the stable region, zero once it leaves, averaged over feet with
//! valid contact and zero when neither foot has valid contact.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::contact::{region_distance, CoPEstimate, StableRegion};
use crate::reference::RefSample;

/// Weights and sensitivities. Weights follow the trained controller
/// setting and sum to 3.6. The sensitivities are tuning defaults chosen so
/// each term sits roughly in [0.3, 0.9] for typical early-training errors;
/// all are configurable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardConfig {
    pub w_pose: f64,
    pub w_velocity: f64,
    pub w_end_effector: f64,
    pub w_root: f64,
    pub w_com: f64,
    pub w_cop: f64,
    pub w_torque: f64,
    pub sigma_pose: f64,
    pub sigma_velocity: f64,
    pub sigma_end_effector: f64,
    pub sigma_root_pos: f64,
    pub sigma_root_rot: f64,
    pub sigma_com: f64,
    pub sigma_cop: f64,
    pub sigma_torque: f64,
    pub region: StableRegion,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_pose: 0.8,
            w_velocity: 0.1,
            w_end_effector: 0.7,
            w_root: 0.7,
            w_com: 0.4,
            w_cop: 0.8,
            w_torque: 0.1,
            sigma_pose: 2.0,
            sigma_velocity: 0.1,
            sigma_end_effector: 40.0,
            sigma_root_pos: 5.0,
            sigma_root_rot: 5.0,
            sigma_com: 10.0,
            sigma_cop: 500.0,
            sigma_torque: 5e-5,
            region: StableRegion::default(),
        }
    }
}

impl RewardConfig {
    pub fn weight_sum(&self) -> f64 {
        self.w_pose + self.w_velocity + self.w_end_effector + self.w_root + self.w_com
            + self.w_cop
            + self.w_torque
    }
}

/// The individual terms, each in [0, 1], plus the weighted total.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub pose: f64,
    pub velocity: f64,
    pub end_effector: f64,
    pub root: f64,
    pub com: f64,
    pub cop: f64,
    pub cop_left: f64,
    pub cop_right: f64,
    pub torque: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn zeros() -> Self {
        Self {
            pose: 0.0,
            velocity: 0.0,
            end_effector: 0.0,
            root: 0.0,
            com: 0.0,
            cop: 0.0,
            cop_left: 0.0,
            cop_right: 0.0,
            torque: 0.0,
            total: 0.0,
        }
    }
}

/// Measured quantities entering the reward.
#[derive(Debug, Clone)]
pub struct RewardInputs<'a> {
    pub joints: &'a [f64],
    pub joint_vels: &'a [f64],
    pub root_pos: Vector3<f64>,
    pub root_quat: UnitQuaternion<f64>,
    pub com: Vector3<f64>,
    /// Foot positions relative to the root frame, left then right.
    pub ee_left: Vector3<f64>,
    pub ee_right: Vector3<f64>,
    pub cops: &'a CoPEstimate,
    /// Applied actuator torques (mean over the control step's substeps).
    pub torques: &'a [f64],
}

pub fn compute_reward(cfg: &RewardConfig, target: &RefSample, actual: &RewardInputs) -> RewardBreakdown {
    let pose_err: f64 = target
        .joints
        .iter()
        .zip(actual.joints)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    let pose = (-cfg.sigma_pose * pose_err).exp();

    let vel_err: f64 = target
        .joint_vels
        .iter()
        .zip(actual.joint_vels)
        .map(|(t, v)| (t - v) * (t - v))
        .sum();
    let velocity = (-cfg.sigma_velocity * vel_err).exp();

    let ee_err = (target.ee_left - actual.ee_left).norm_squared()
        + (target.ee_right - actual.ee_right).norm_squared();
    let end_effector = (-cfg.sigma_end_effector * ee_err).exp();

    let root_pos_err = (target.root_pos - actual.root_pos).norm_squared();
    let root_rot_err = quaternion_distance_squared(&target.root_quat, &actual.root_quat);
    let root = (-cfg.sigma_root_pos * root_pos_err - cfg.sigma_root_rot * root_rot_err).exp();

    let com = (-cfg.sigma_com * (target.com - actual.com).norm_squared()).exp();

    let mut cop_terms = [0.0; 2];
    let mut valid_count = 0;
    let mut cop_sum = 0.0;
    for (i, foot) in actual.cops.feet.iter().enumerate().take(2) {
        if foot.valid {
            let (dist, inside) = region_distance(foot, &cfg.region);
            let term = if inside { (-cfg.sigma_cop * dist * dist).exp() } else { 0.0 };
            cop_terms[i] = term;
            cop_sum += term;
            valid_count += 1;
        }
    }
    let cop = if valid_count > 0 { cop_sum / valid_count as f64 } else { 0.0 };

    let torque_err: f64 = actual.torques.iter().map(|t| t * t).sum();
    let torque = (-cfg.sigma_torque * torque_err).exp();

    let total = cfg.w_pose * pose
        + cfg.w_velocity * velocity
        + cfg.w_end_effector * end_effector
        + cfg.w_root * root
        + cfg.w_com * com
        + cfg.w_cop * cop
        + cfg.w_torque * torque;

    RewardBreakdown {
        pose,
        velocity,
        end_effector,
        root,
        com,
        cop,
        cop_left: cop_terms[0],
        cop_right: cop_terms[1],
        torque,
        total,
    }
}

/// Squared Euclidean distance between quaternions, taking the closer of
/// the two sign representations.
fn quaternion_distance_squared(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let qa = a.into_inner();
    let qb = b.into_inner();
    let direct = (qa.w - qb.w).powi(2)
        + (qa.i - qb.i).powi(2)
        + (qa.j - qb.j).powi(2)
        + (qa.k - qb.k).powi(2);
    let flipped = (qa.w + qb.w).powi(2)
        + (qa.i + qb.i).powi(2)
        + (qa.j + qb.j).powi(2)
        + (qa.k + qb.k).powi(2);
    direct.min(flipped)
}
