//! Experiment orchestration behind the service and CLI: training runs,
//! checkpoint/playback evaluation, the out-of-distribution sweep, and the
//! analytic self-check suite. Every artifact lands under the run's output
//! directory.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::Action;
use crate::config::{ConfigError, RunConfig};
use crate::env::randomize::DynamicsDraw;
use crate::env::{EnvError, SquatEnv, TerminationReason};
use crate::metrics::{metrics, EvalReport, MetricsError};
use crate::nn::{Checkpoint, CheckpointError, Tape};
use crate::ppo::{self, PolicyDriver, PpoError, TrainProgress};
use crate::telemetry::{
    export_plots, write_cop_csv, write_training_log, TelemetryError, TelemetryWriter,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cancelled")]
    Cancelled,
    #[error("{0}")]
    Other(String),
}

/// Periodic progress reported by long jobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Progress {
    pub phase: String,
    pub current: u64,
    pub total: u64,
    pub detail: String,
}

pub type ProgressFn<'a> = &'a mut dyn FnMut(Progress);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: u64,
    pub iterations: u64,
    pub baseline_step_reward: f64,
    pub final_step_reward: f64,
    pub improvement: f64,
    pub final_checkpoint: PathBuf,
    pub training_log: PathBuf,
    pub stopped_early: bool,
}

/// Run PPO per the config; artifacts: `training_log.csv`,
/// `checkpoints/*.json`, `config.toml`.
pub fn train_run(
    cfg: &RunConfig,
    out_dir: &Path,
    cancel: &Arc<AtomicBool>,
    progress: ProgressFn,
) -> Result<TrainSummary, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    cfg.save(&out_dir.join("config.toml"))?;
    let spec = cfg.model_spec()?;

    let output = ppo::train(&spec, &cfg.env, &cfg.ppo, Some(out_dir), &mut |p: &TrainProgress| {
        progress(Progress {
            phase: "train".into(),
            current: p.samples,
            total: p.budget,
            detail: format!("iteration {} mean step reward {:.3}", p.iteration, p.mean_step_reward),
        });
        !cancel.load(Ordering::Relaxed)
    })?;

    let log_path = out_dir.join("training_log.csv");
    write_training_log(&log_path, &output.log)?;

    if output.stopped_early {
        return Err(RunError::Cancelled);
    }
    let baseline = output.log.first().map(|l| l.mean_step_reward).unwrap_or(0.0);
    let final_reward = output.log.last().map(|l| l.mean_step_reward).unwrap_or(0.0);
    Ok(TrainSummary {
        samples: output.samples,
        iterations: output.log.len() as u64,
        baseline_step_reward: baseline,
        final_step_reward: final_reward,
        improvement: if baseline > 0.0 { (final_reward - baseline) / baseline } else { 0.0 },
        final_checkpoint: output
            .final_checkpoint
            .expect("training with an output directory writes a final checkpoint"),
        training_log: log_path,
        stopped_early: output.stopped_early,
    })
}

/// What drives the joints during evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// Feed the reference targets straight to the PD layer.
    Playback,
    /// Deterministic (mean) policy from a checkpoint.
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub report: EvalReport,
    pub telemetry: Option<PathBuf>,
    pub cop_csv: Option<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub fell: bool,
    pub termination: Option<String>,
}

/// Play a controller for N cycles and aggregate metrics. Artifacts:
/// `telemetry.csv`, `cop.csv`, `report.json`, `plots/*.csv`.
pub fn eval_run(
    cfg: &RunConfig,
    controller: &Controller,
    out_dir: &Path,
    progress: ProgressFn,
) -> Result<EvalSummary, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let spec = cfg.model_spec()?;
    let mut env_cfg = cfg.env_for_eval();
    // Evaluation runs to the requested cycle count from the top of the
    // cycle, not the training horizon or a random phase.
    env_cfg.horizon = None;
    env_cfg.reset_phase = crate::env::ResetPhase::Standing;
    let mut env = SquatEnv::new(spec, env_cfg)?;

    let driver = match controller {
        Controller::Playback => None,
        Controller::Checkpoint(path) => {
            let ckpt = Checkpoint::load(path)?;
            if ckpt.obs_dim != env.obs_dim() {
                return Err(RunError::Other(format!(
                    "checkpoint observation dimension {} does not match environment {}",
                    ckpt.obs_dim,
                    env.obs_dim()
                )));
            }
            Some(PolicyDriver::from_checkpoint(ckpt))
        }
    };

    let steps = cfg.eval_cycles * (cfg.env.reference.cycle * cfg.env.pd.control_rate_hz) as usize;
    let mut rows = Vec::with_capacity(steps);
    let mut tape = Tape::default();
    let mut obs = env.reset(cfg.seed)?;
    let mut fell = false;
    let mut termination = None;
    for k in 0..steps {
        let action = match &driver {
            None => {
                let (targets, _) = env.reference().sample_joints((k + 1) as f64 / cfg.env.pd.control_rate_hz);
                Action(targets.to_vec())
            }
            Some(d) => d.act_mean(&obs.0, &env.action_base(), &mut tape),
        };
        let outcome = env.step(&action)?;
        rows.push(outcome.telemetry.clone());
        obs = outcome.obs;
        if k % 120 == 0 {
            progress(Progress {
                phase: "eval".into(),
                current: k as u64,
                total: steps as u64,
                detail: format!("t = {:.2} s", outcome.telemetry.time),
            });
        }
        if outcome.done {
            fell = outcome.reason == Some(TerminationReason::Fall);
            termination = outcome.reason.map(|r| format!("{r:?}").to_lowercase());
            break;
        }
    }

    let report = metrics(&rows, cfg.env.reference.cycle, cfg.env.reward.region, fell as usize)?;
    let mut telemetry_path = None;
    let mut cop_path = None;
    let mut plots = Vec::new();
    if cfg.telemetry {
        let path = out_dir.join("telemetry.csv");
        let mut writer = TelemetryWriter::create(&path)?;
        for row in &rows {
            writer.write(row)?;
        }
        writer.finish()?;
        telemetry_path = Some(path);

        let cp = out_dir.join("cop.csv");
        write_cop_csv(&cp, &rows)?;
        cop_path = Some(cp);
        plots = export_plots(&out_dir.join("plots"), &rows)?;
    }
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report).unwrap())?;

    Ok(EvalSummary { report, telemetry: telemetry_path, cop_csv: cop_path, plots, fell, termination })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub env_id: usize,
    pub draw: DynamicsDraw,
    pub mean_cycle_reward: f64,
    pub cop_in_region: f64,
    pub fell: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub mean_reward: f64,
    pub falls: usize,
}

/// Evaluate a controller in `envs` environments drawn from the test
/// randomization ranges, one squat cycle each; per-environment seeds make
/// the sweep reproducible. Rows land in `sweep.csv`.
pub fn sweep_run(
    cfg: &RunConfig,
    controller: &Controller,
    out_dir: &Path,
    cancel: &Arc<AtomicBool>,
    progress: ProgressFn,
) -> Result<SweepSummary, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let spec = cfg.model_spec()?;
    let mut env_cfg = cfg.env.clone();
    env_cfg.randomization = crate::config::RandomizationPreset::Test.spec();
    env_cfg.horizon = None;

    let driver = match controller {
        Controller::Playback => None,
        Controller::Checkpoint(path) => {
            let ckpt = Checkpoint::load(path)?;
            Some(Arc::new(ckpt))
        }
    };

    let envs = cfg.sweep_envs;
    let workers = cfg.ppo.workers.clamp(1, 8);
    let chunk = envs.div_ceil(workers);
    let results: Vec<Result<Vec<SweepRow>, RunError>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(envs);
            if lo >= hi {
                break;
            }
            let env_cfg = env_cfg.clone();
            let spec = spec.clone();
            let driver = driver.clone();
            let cancel = Arc::clone(cancel);
            let base_seed = cfg.seed;
            handles.push(scope.spawn(move || {
                let mut env = SquatEnv::new(spec, env_cfg.clone())?;
                let steps = (env_cfg.reference.cycle * env_cfg.pd.control_rate_hz) as usize;
                let mut tape = Tape::default();
                let mut rows = Vec::with_capacity(hi - lo);
                for env_id in lo..hi {
                    if cancel.load(Ordering::Relaxed) {
                        return Err(RunError::Cancelled);
                    }
                    let seed = base_seed.wrapping_add(env_id as u64);
                    let mut obs = env.reset(seed)?;
                    let draw = env.current_draw();
                    let mut reward_sum = 0.0;
                    let mut in_region = 0usize;
                    let mut taken = 0usize;
                    let mut fell = false;
                    for k in 0..steps {
                        let action = match &driver {
                            None => {
                                let (targets, _) = env
                                    .reference()
                                    .sample_joints((k + 1) as f64 / env_cfg.pd.control_rate_hz);
                                Action(targets.to_vec())
                            }
                            Some(ckpt) => {
                                let d = PolicyDriver {
                                    net: ckpt.net.clone(),
                                    normalizer: ckpt.normalizer.clone(),
                                };
                                d.act_mean(&obs.0, &env.action_base(), &mut tape)
                            }
                        };
                        let outcome = env.step(&action)?;
                        reward_sum += outcome.reward.total;
                        taken += 1;
                        let region = env_cfg.reward.region;
                        let l = &outcome.telemetry.cop_left;
                        let r = &outcome.telemetry.cop_right;
                        if l.valid
                            && r.valid
                            && l.cop[0].abs() <= region.half_x
                            && l.cop[1].abs() <= region.half_y
                            && r.cop[0].abs() <= region.half_x
                            && r.cop[1].abs() <= region.half_y
                        {
                            in_region += 1;
                        }
                        obs = outcome.obs;
                        if outcome.done {
                            fell = outcome.reason == Some(TerminationReason::Fall);
                            break;
                        }
                    }
                    rows.push(SweepRow {
                        env_id,
                        draw,
                        mean_cycle_reward: reward_sum / taken.max(1) as f64,
                        cop_in_region: in_region as f64 / taken.max(1) as f64,
                        fell,
                    });
                }
                Ok(rows)
            }));
        }
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut rows = Vec::with_capacity(envs);
    for result in results {
        rows.extend(result?);
    }
    rows.sort_by_key(|r| r.env_id);
    progress(Progress {
        phase: "sweep".into(),
        current: envs as u64,
        total: envs as u64,
        detail: "writing results".into(),
    });

    let csv_path = out_dir.join("sweep.csv");
    let mut writer = csv::Writer::from_path(&csv_path).map_err(TelemetryError::from)?;
    writer
        .write_record([
            "env_id",
            "friction",
            "mass",
            "motor_strength",
            "latency",
            "inertia",
            "com_offset",
            "mean_cycle_reward",
            "cop_in_region",
            "fell",
        ])
        .map_err(TelemetryError::from)?;
    for row in &rows {
        writer
            .write_record([
                row.env_id.to_string(),
                format!("{}", row.draw.friction),
                format!("{}", row.draw.mass),
                format!("{}", row.draw.motor_strength),
                format!("{}", row.draw.latency),
                format!("{}", row.draw.inertia),
                format!("{}", row.draw.com_offset),
                format!("{}", row.mean_cycle_reward),
                format!("{}", row.cop_in_region),
                (row.fell as u8).to_string(),
            ])
            .map_err(TelemetryError::from)?;
    }
    writer.flush().map_err(|e| TelemetryError::from(csv::Error::from(e)))?;

    let mean_reward = rows.iter().map(|r| r.mean_cycle_reward).sum::<f64>() / rows.len().max(1) as f64;
    let falls = rows.iter().filter(|r| r.fell).count();
    std::fs::write(
        out_dir.join("sweep_summary.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "envs": rows.len(),
            "mean_reward": mean_reward,
            "falls": falls,
        }))
        .unwrap(),
    )?;
    Ok(SweepSummary { rows, csv: csv_path, mean_reward, falls })
}
