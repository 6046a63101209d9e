//! Evaluation metrics computed from per-step telemetry: CoP in-region
//! fractions, reward-term means, per-joint peak torques, fall counts and
//! per-cycle segmentation by reference phase.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::StableRegion;
use crate::env::StepTelemetry;
use crate::telemetry::JOINT_NAMES;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("telemetry covers {covered:.2} s, less than one {cycle:.2} s cycle")]
    IncompleteCycle { covered: f64, cycle: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleStats {
    pub index: usize,
    pub steps: usize,
    pub mean_total_reward: f64,
    pub cop_in_region: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub steps: usize,
    pub duration: f64,
    pub cycles_completed: usize,
    /// Fraction of steps with a valid CoP inside the stable region.
    pub cop_in_region_left: f64,
    pub cop_in_region_right: f64,
    pub cop_in_region_both: f64,
    pub reward_means: RewardMeans,
    /// Peak |torque| per joint over the whole run, N·m, in joint order.
    pub peak_torque: Vec<JointPeak>,
    pub fall_count: usize,
    pub per_cycle: Vec<CycleStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointPeak {
    pub joint: String,
    pub peak_abs_torque: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardMeans {
    pub pose: f64,
    pub velocity: f64,
    pub end_effector: f64,
    pub root: f64,
    pub com: f64,
    pub cop: f64,
    pub torque: f64,
    pub total: f64,
}

/// Aggregate a telemetry stream covering at least one reference cycle.
pub fn metrics(
    rows: &[StepTelemetry],
    cycle: f64,
    region: StableRegion,
    falls: usize,
) -> Result<EvalReport, MetricsError> {
    let covered = rows.last().map(|t| t.time).unwrap_or(0.0);
    if covered + 1e-9 < cycle {
        return Err(MetricsError::IncompleteCycle { covered, cycle });
    }
    let steps = rows.len();
    let inside = |cop: &crate::contact::FootCop| {
        cop.valid && cop.cop[0].abs() <= region.half_x && cop.cop[1].abs() <= region.half_y
    };

    let mut in_l = 0usize;
    let mut in_r = 0usize;
    let mut in_both = 0usize;
    let mut sums = [0.0; 8];
    let mut peaks = [0.0f64; 8];
    for t in rows {
        let l = inside(&t.cop_left);
        let r = inside(&t.cop_right);
        in_l += l as usize;
        in_r += r as usize;
        in_both += (l && r) as usize;
        sums[0] += t.reward.pose;
        sums[1] += t.reward.velocity;
        sums[2] += t.reward.end_effector;
        sums[3] += t.reward.root;
        sums[4] += t.reward.com;
        sums[5] += t.reward.cop;
        sums[6] += t.reward.torque;
        sums[7] += t.reward.total;
        for j in 0..8 {
            peaks[j] = peaks[j].max(t.torques_peak[j].abs()).max(t.torques[j].abs());
        }
    }
    let n = steps.max(1) as f64;

    // Segment by reference phase.
    let mut per_cycle = Vec::new();
    let full_cycles = (covered / cycle).floor() as usize;
    for c in 0..full_cycles {
        let lo = c as f64 * cycle;
        let hi = lo + cycle;
        let slice: Vec<&StepTelemetry> =
            rows.iter().filter(|t| t.time > lo + 1e-9 && t.time <= hi + 1e-9).collect();
        if slice.is_empty() {
            continue;
        }
        let mean_total = slice.iter().map(|t| t.reward.total).sum::<f64>() / slice.len() as f64;
        let in_region = slice
            .iter()
            .filter(|t| inside(&t.cop_left) && inside(&t.cop_right))
            .count() as f64
            / slice.len() as f64;
        per_cycle.push(CycleStats {
            index: c,
            steps: slice.len(),
            mean_total_reward: mean_total,
            cop_in_region: in_region,
        });
    }

    Ok(EvalReport {
        steps,
        duration: covered,
        cycles_completed: full_cycles,
        cop_in_region_left: in_l as f64 / n,
        cop_in_region_right: in_r as f64 / n,
        cop_in_region_both: in_both as f64 / n,
        reward_means: RewardMeans {
            pose: sums[0] / n,
            velocity: sums[1] / n,
            end_effector: sums[2] / n,
            root: sums[3] / n,
            com: sums[4] / n,
            cop: sums[5] / n,
            torque: sums[6] / n,
            total: sums[7] / n,
        },
        peak_torque: JOINT_NAMES
            .iter()
            .zip(peaks)
            .map(|(j, p)| JointPeak { joint: j.to_string(), peak_abs_torque: p })
            .collect(),
        fall_count: falls,
        per_cycle,
    })
}
