//! The training loop: parallel rollout workers stepping their own
//! environment instances against an immutable parameter snapshot, GAE per
//! worker, one PPO update per iteration, checkpoints and an iteration log.
//!
//! Determinism: per-worker ChaCha streams, fixed merge order, and a fixed
//! worker count make runs bit-reproducible for a given seed.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::update::{normalize_advantages, update};
use super::{Adam, PpoConfig, PpoError};
use crate::actuation::Action;
use crate::env::{EnvConfig, SquatEnv};
use crate::model::ModelSpec;
use crate::nn::{Checkpoint, CheckpointMeta, PolicyValueNet, RunningNorm, Tape};

/// Shared policy state needed to act in an environment: the networks and
/// the (frozen) observation normalizer. The network output is an offset
/// around the next reference joint target, so a zero output plays the
/// reference back.
#[derive(Debug, Clone)]
pub struct PolicyDriver {
    pub net: PolicyValueNet,
    pub normalizer: RunningNorm,
}

impl PolicyDriver {
    pub fn from_checkpoint(ckpt: Checkpoint) -> Self {
        Self { net: ckpt.net, normalizer: ckpt.normalizer }
    }

    /// Deterministic action for evaluation: the mean offset around `base`.
    pub fn act_mean(&self, obs: &[f64], base: &[f64; 8], tape: &mut Tape) -> Action {
        let mut x = obs.to_vec();
        self.normalizer.normalize(&mut x);
        let offset = self.net.policy.forward(&x, tape);
        Action(base.iter().zip(offset).map(|(b, o)| b + o).collect())
    }
}

/// Per-iteration log record, one CSV row in the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u64,
    pub samples: u64,
    pub mean_step_reward: f64,
    pub mean_episode_reward: f64,
    pub mean_episode_length: f64,
    pub episodes_finished: u64,
    pub reward_pose: f64,
    pub reward_velocity: f64,
    pub reward_end_effector: f64,
    pub reward_root: f64,
    pub reward_com: f64,
    pub reward_cop: f64,
    pub reward_torque: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
    pub mean_log_std: f64,
    pub falls: u64,
}

#[derive(Debug, Clone)]
pub struct TrainProgress {
    pub iteration: u64,
    pub samples: u64,
    pub budget: u64,
    pub mean_step_reward: f64,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub log: Vec<IterationLog>,
    pub final_net: PolicyValueNet,
    pub final_normalizer: RunningNorm,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: Option<PathBuf>,
    pub samples: u64,
    pub stopped_early: bool,
}

struct Worker {
    env: SquatEnv,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    episode_reward: f64,
    episode_steps: u64,
    episode_index: u64,
    seed_base: u64,
}

#[derive(Default, Clone)]
struct RewardTermSums {
    pose: f64,
    velocity: f64,
    end_effector: f64,
    root: f64,
    com: f64,
    cop: f64,
    torque: f64,
}

struct WorkerHarvest {
    buffer: RolloutBuffer,
    norm_delta: RunningNorm,
    reward_sum: f64,
    steps: u64,
    episode_rewards: Vec<f64>,
    episode_lengths: Vec<u64>,
    falls: u64,
    terms: RewardTermSums,
}

/// Run PPO to the sample budget. `progress` is called once per iteration;
/// returning `false` stops training after saving the current state.
pub fn train(
    exo_spec: &ModelSpec,
    env_cfg: &EnvConfig,
    cfg: &PpoConfig,
    out_dir: Option<&Path>,
    progress: &mut dyn FnMut(&TrainProgress) -> bool,
) -> Result<TrainOutput, PpoError> {
    assert!(cfg.workers >= 1, "need at least one worker");
    assert!(cfg.buffer_size % cfg.workers == 0, "buffer must split evenly across workers");

    let mut workers = Vec::with_capacity(cfg.workers);
    for w in 0..cfg.workers {
        let mut env = SquatEnv::new(exo_spec.clone(), env_cfg.clone())?;
        let seed_base = cfg.seed.wrapping_mul(1_000_003).wrapping_add(w as u64 * 7_919);
        let obs = env.reset(seed_base)?.0;
        workers.push(Worker {
            env,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ (w as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            obs,
            episode_reward: 0.0,
            episode_steps: 0,
            episode_index: 0,
            seed_base,
        });
    }

    let obs_dim = workers[0].env.obs_dim();
    let act_dim = workers[0].env.action_dim();
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = PolicyValueNet::init(obs_dim, act_dim, &cfg.hidden, &mut init_rng, cfg.log_std_init);
    let mut normalizer = RunningNorm::new(obs_dim, cfg.normalize_obs);
    let mut adam = Adam::new(net.param_count());
    let mut update_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD1B5_4A32_D192_ED03);

    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    let mut samples: u64 = 0;
    let mut iteration: u64 = 0;
    let mut stopped_early = false;
    let steps_per_worker = cfg.buffer_size / cfg.workers;

    while samples < cfg.sample_budget {
        iteration += 1;
        let net_snapshot = Arc::new(net.clone());
        let norm_snapshot = Arc::new(normalizer.clone());

        // Collect in parallel; results are consumed in worker order so the
        // outcome does not depend on scheduling.
        let harvests: Vec<Result<WorkerHarvest, PpoError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = workers
                .iter_mut()
                .map(|worker| {
                    let net = Arc::clone(&net_snapshot);
                    let norm = Arc::clone(&norm_snapshot);
                    scope.spawn(move || {
                        collect_rollout(worker, &net, &norm, steps_per_worker, cfg)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
        });

        let mut merged: Option<RolloutBuffer> = None;
        let mut reward_sum = 0.0;
        let mut step_count: u64 = 0;
        let mut episode_rewards = Vec::new();
        let mut episode_lengths = Vec::new();
        let mut falls = 0;
        let mut terms = RewardTermSums::default();
        for harvest in harvests {
            let harvest: WorkerHarvest = harvest?;
            reward_sum += harvest.reward_sum;
            step_count += harvest.steps;
            episode_rewards.extend(harvest.episode_rewards);
            episode_lengths.extend(harvest.episode_lengths);
            falls += harvest.falls;
            terms.pose += harvest.terms.pose;
            terms.velocity += harvest.terms.velocity;
            terms.end_effector += harvest.terms.end_effector;
            terms.root += harvest.terms.root;
            terms.com += harvest.terms.com;
            terms.cop += harvest.terms.cop;
            terms.torque += harvest.terms.torque;
            normalizer.merge(&harvest.norm_delta);
            match &mut merged {
                None => merged = Some(harvest.buffer),
                Some(m) => m.absorb(harvest.buffer),
            }
        }
        let mut buffer = merged.expect("at least one worker");
        normalize_advantages(&mut buffer.advantages);

        let lr = cfg.lr_at(samples);
        let stats = update(&mut net, &mut adam, &buffer, cfg, lr, &mut update_rng).map_err(|e| {
            match e {
                PpoError::NonFiniteLoss { detail, .. } => PpoError::NonFiniteLoss { iteration, detail },
                other => other,
            }
        })?;
        samples += step_count;

        let steps_f = step_count.max(1) as f64;
        let entry = IterationLog {
            iteration,
            samples,
            mean_step_reward: reward_sum / steps_f,
            mean_episode_reward: mean(&episode_rewards),
            mean_episode_length: episode_lengths.iter().map(|l| *l as f64).sum::<f64>()
                / episode_lengths.len().max(1) as f64,
            episodes_finished: episode_rewards.len() as u64,
            reward_pose: terms.pose / steps_f,
            reward_velocity: terms.velocity / steps_f,
            reward_end_effector: terms.end_effector / steps_f,
            reward_root: terms.root / steps_f,
            reward_com: terms.com / steps_f,
            reward_cop: terms.cop / steps_f,
            reward_torque: terms.torque / steps_f,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
            grad_norm: stats.grad_norm,
            learning_rate: lr,
            mean_log_std: net.log_std.iter().sum::<f64>() / net.log_std.len() as f64,
            falls,
        };
        let keep_going = progress(&TrainProgress {
            iteration,
            samples,
            budget: cfg.sample_budget,
            mean_step_reward: entry.mean_step_reward,
        });
        log.push(entry);

        if let Some(dir) = out_dir {
            if iteration % cfg.checkpoint_every == 0 {
                let path = dir.join("checkpoints").join(format!("iter_{iteration:06}.json"));
                save_checkpoint(&net, &normalizer, cfg, samples, iteration, env_cfg, &path)?;
                checkpoints.push(path);
            }
        }
        if !keep_going {
            stopped_early = true;
            break;
        }
    }

    let final_checkpoint = if let Some(dir) = out_dir {
        let path = dir.join("checkpoints").join("final.json");
        save_checkpoint(&net, &normalizer, cfg, samples, iteration, env_cfg, &path)?;
        checkpoints.push(path.clone());
        Some(path)
    } else {
        None
    };

    Ok(TrainOutput {
        log,
        final_net: net,
        final_normalizer: normalizer,
        checkpoints,
        final_checkpoint,
        samples,
        stopped_early,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn save_checkpoint(
    net: &PolicyValueNet,
    normalizer: &RunningNorm,
    cfg: &PpoConfig,
    samples: u64,
    iterations: u64,
    env_cfg: &EnvConfig,
    path: &Path,
) -> Result<(), PpoError> {
    let meta = CheckpointMeta {
        samples,
        iterations,
        seed: cfg.seed,
        mode: format!("{:?}", env_cfg.mode).to_lowercase(),
        note: String::new(),
    };
    Checkpoint::new(net.clone(), normalizer.clone(), meta).save(path)?;
    Ok(())
}

/// Collect `steps` transitions from one worker's environment against the
/// frozen snapshot. Observations are stored normalized; the Welford deltas
/// for the next iteration's normalizer come back separately.
fn collect_rollout(
    worker: &mut Worker,
    net: &PolicyValueNet,
    norm: &RunningNorm,
    steps: usize,
    cfg: &PpoConfig,
) -> Result<WorkerHarvest, PpoError> {
    let mut buffer = RolloutBuffer::with_capacity(steps);
    let mut norm_delta = RunningNorm::new(norm.dim(), cfg.normalize_obs);
    let mut policy_tape = Tape::default();
    let mut value_tape = Tape::default();
    let mut reward_sum = 0.0;
    let mut episode_rewards = Vec::new();
    let mut episode_lengths = Vec::new();
    let mut falls = 0;
    let mut terms = RewardTermSums::default();

    for _ in 0..steps {
        norm_delta.update(&worker.obs);
        let mut x = worker.obs.clone();
        norm.normalize(&mut x);
        let (dist, value) = net
            .forward(&x, &mut policy_tape, &mut value_tape)
            .expect("observation dimension fixed per environment");
        let offset = dist.sample(&mut worker.rng);
        let log_prob = dist.log_prob(&offset);
        let base = worker.env.action_base();
        let action = Action(base.iter().zip(&offset).map(|(b, o)| b + o).collect::<Vec<f64>>());

        let outcome = worker.env.step(&action)?;
        let reward = outcome.reward.total;
        reward_sum += reward;
        terms.pose += outcome.reward.pose;
        terms.velocity += outcome.reward.velocity;
        terms.end_effector += outcome.reward.end_effector;
        terms.root += outcome.reward.root;
        terms.com += outcome.reward.com;
        terms.cop += outcome.reward.cop;
        terms.torque += outcome.reward.torque;
        worker.episode_reward += reward;
        worker.episode_steps += 1;

        buffer.push(x, offset, log_prob, reward, value, outcome.done);

        if outcome.done {
            if outcome.reason == Some(crate::env::TerminationReason::Fall) {
                falls += 1;
            }
            episode_rewards.push(worker.episode_reward);
            episode_lengths.push(worker.episode_steps);
            worker.episode_reward = 0.0;
            worker.episode_steps = 0;
            worker.episode_index += 1;
            let seed = worker.seed_base.wrapping_add(worker.episode_index.wrapping_mul(104_729));
            worker.obs = worker.env.reset(seed)?.0;
        } else {
            worker.obs = outcome.obs.0;
        }
    }

    // Bootstrap with the value of the state the rollout was truncated in.
    let bootstrap = if *buffer.dones.last().unwrap_or(&true) {
        0.0
    } else {
        let mut x = worker.obs.clone();
        norm.normalize(&mut x);
        net.value.forward(&x, &mut value_tape)[0]
    };
    buffer.finish(bootstrap, cfg.gamma, cfg.gae_lambda)?;

    Ok(WorkerHarvest {
        buffer,
        norm_delta,
        reward_sum,
        steps: steps as u64,
        episode_rewards,
        episode_lengths,
        falls,
        terms,
    })
}
