//! The reinforcement-learning environment: stacked observation histories
//! with simulated sensor latency, the seven-term reward, per-episode
//! dynamics randomization, perturbation forces, the spring-coupled human
//! load, and episode lifecycle management.
//!
//! One environment instance owns all of its mutable state and is
//! single-threaded; training runs many instances in parallel.

pub mod human;
pub mod perturb;
pub mod randomize;
pub mod reward;

use std::collections::VecDeque;

use nalgebra::{DVector, Quaternion, UnitQuaternion, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{interpolate, Action, ActionFilter, PdConfig};
use crate::contact::{apply_contact_forces, compute_cop, contact_forces, ContactParams, FootCop};
use crate::model::ModelSpec;
use crate::multibody::{
    DynWorkspace, DynamicsError, ExternalForceSet, GeneralizedState, ModelInstance, PdCommand,
};
use crate::reference::{ReferenceError, ReferenceMotion};
use human::{attach_human, HumanCoupling, HumanLoadParams, SpringTelemetry};
use perturb::{PerturbationSpec, PerturbationState};
use randomize::{DynamicsDraw, RandomizationSpec};
use reward::{compute_reward, RewardBreakdown, RewardConfig, RewardInputs};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already finished")]
    EpisodeFinished,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
}

/// The three experiment settings: plain squatting, squatting under random
/// adversary forces, and squatting with the passive human strapped in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Clean,
    Perturbed,
    Human,
}

/// Reference squat shape.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferenceParams {
    pub depth: f64,
    pub cycle: f64,
    pub standing_knee: f64,
}

/// Where in the reference cycle an episode begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResetPhase {
    /// Always the standing pose at the cycle start.
    #[default]
    Standing,
    /// A uniformly random control tick of the cycle, starting at the
    /// reference pose and velocity for that phase. Spreads training over
    /// every part of the motion.
    UniformCycle,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self { depth: 0.25, cycle: 4.0, standing_knee: 0.24 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub mode: Mode,
    pub reward: RewardConfig,
    pub randomization: RandomizationSpec,
    pub perturbation: PerturbationSpec,
    pub human: HumanLoadParams,
    pub contact: ContactParams,
    pub pd: PdConfig,
    pub reference: ReferenceParams,
    /// Physics rate, Hz; the policy runs at `pd.control_rate_hz`.
    pub sim_rate_hz: f64,
    /// Episode horizon in seconds; `None` runs until a fall or divergence.
    pub horizon: Option<f64>,
    /// Uniform joint-angle noise applied at reset, rad.
    pub reset_noise: f64,
    /// Fraction of standing root height below which the episode is a fall.
    pub fall_fraction: f64,
    /// Episode start phase within the reference cycle.
    #[serde(default)]
    pub reset_phase: ResetPhase,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Clean,
            reward: RewardConfig::default(),
            randomization: RandomizationSpec::train(),
            perturbation: PerturbationSpec::default(),
            human: HumanLoadParams::default(),
            contact: ContactParams::default(),
            pd: PdConfig::default(),
            reference: ReferenceParams::default(),
            sim_rate_hz: 900.0,
            horizon: Some(8.0),
            reset_noise: 0.02,
            fall_fraction: 0.6,
            reset_phase: ResetPhase::Standing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Fall,
    Divergence,
    Horizon,
}

/// Flat observation vector. Layout: three stacked sensed states
/// `(q, v, cop)`, the last three actions, then the six future joint
/// targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

/// Everything the harness wants to log about one control step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepTelemetry {
    pub time: f64,
    pub joints: [f64; 8],
    pub joint_vels: [f64; 8],
    /// Mean applied torque over the substeps, per joint.
    pub torques: [f64; 8],
    pub torques_peak: [f64; 8],
    pub cop_left: FootCop,
    pub cop_right: FootCop,
    pub reward: RewardBreakdown,
    pub perturb_forces: [f64; 5],
    pub springs: SpringTelemetry,
    pub action_raw: [f64; 8],
    pub action_filtered: [f64; 8],
    pub root_pos: [f64; 3],
    pub target_joints: [f64; 8],
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub reason: Option<TerminationReason>,
    pub telemetry: StepTelemetry,
}

/// One latency-delayed sensor snapshot: exoskeleton generalized state plus
/// per-foot CoP channels (x, y per foot then the two contact flags).
#[derive(Debug, Clone, Copy)]
struct Sensed {
    q: [f64; 15],
    v: [f64; 14],
    cop: [f64; 6],
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    t: f64,
    sensed: Sensed,
}

pub struct SquatEnv {
    cfg: EnvConfig,
    exo_spec: ModelSpec,
    nominal: ModelInstance,
    reference: ReferenceMotion,
    standing_joints: [f64; 8],
    standing_root_z: f64,

    // Episode state.
    model: ModelInstance,
    ws: DynWorkspace,
    ws_ref: DynWorkspace,
    state: GeneralizedState,
    draw: DynamicsDraw,
    contact_params: ContactParams,
    coupling: Option<HumanCoupling>,
    perturbation: Option<PerturbationState>,
    filter: ActionFilter,
    prev_filtered: Action,
    rng: ChaCha8Rng,
    ring: VecDeque<Snapshot>,
    sensed_history: VecDeque<Sensed>,
    action_history: VecDeque<[f64; 8]>,
    done: bool,
    reason: Option<TerminationReason>,
    episode_start: f64,

    // Scratch.
    explicit_torques: DVector<f64>,
    implicit_damping: DVector<f64>,
    external: ExternalForceSet,
    applied: Vec<f64>,
    substeps: usize,
}

impl SquatEnv {
    pub fn new(exo_spec: ModelSpec, cfg: EnvConfig) -> Result<Self, EnvError> {
        // In human mode the reference balances the combined system, so the
        // CoM-centering pass must see the full strapped model, posed at the
        // sag the coupled chain actually settles to.
        let (nominal, human_sag) = if cfg.mode == Mode::Human {
            let nominal = ModelInstance::build(&attach_human(&exo_spec, &cfg.human))?;
            let sag = Self::measure_settled_sag(&exo_spec, &cfg)?;
            (nominal, sag)
        } else {
            (ModelInstance::build(&exo_spec)?, 0.0)
        };
        let reference = ReferenceMotion::squat_settled(
            &nominal,
            cfg.reference.depth,
            cfg.reference.cycle,
            cfg.reference.standing_knee,
            human_sag,
        )?;
        Self::assemble(exo_spec, cfg, nominal, reference)
    }

    fn assemble(
        exo_spec: ModelSpec,
        cfg: EnvConfig,
        nominal: ModelInstance,
        reference: ReferenceMotion,
    ) -> Result<Self, EnvError> {
        let (standing_joints, _) = reference.sample_joints(0.0);
        let standing_root_z = reference.standing_root_z();
        let substeps = (cfg.sim_rate_hz / cfg.pd.control_rate_hz).round() as usize;
        let ws = nominal.workspace();
        let ws_ref = nominal.workspace();
        let filter = ActionFilter::new(&cfg.pd, 8);
        let state = nominal.zero_state();
        let nv = nominal.nv();
        Ok(Self {
            cfg,
            exo_spec,
            model: nominal.clone(),
            nominal,
            reference,
            standing_joints,
            standing_root_z,
            ws,
            ws_ref,
            state,
            draw: DynamicsDraw::nominal(),
            contact_params: ContactParams::default(),
            coupling: None,
            perturbation: None,
            filter,
            prev_filtered: Action(standing_joints.to_vec()),
            rng: ChaCha8Rng::seed_from_u64(0),
            ring: VecDeque::with_capacity(64),
            sensed_history: VecDeque::with_capacity(3),
            action_history: VecDeque::with_capacity(3),
            done: true,
            reason: None,
            episode_start: 0.0,
            explicit_torques: DVector::zeros(nv),
            implicit_damping: DVector::zeros(nv),
            external: ExternalForceSet::default(),
            applied: Vec::with_capacity(8),
            substeps,
        })
    }

    /// Hold the standing pose on the nominal human-coupled model until the
    /// chain settles, and report how far the human pelvis rides below its
    /// mount. The welded feet strut part of the trunk load, so this cannot
    /// be read off the pelvis spring stiffness alone.
    fn measure_settled_sag(exo_spec: &ModelSpec, cfg: &EnvConfig) -> Result<f64, EnvError> {
        let calib = EnvConfig {
            mode: Mode::Human,
            randomization: RandomizationSpec::nominal(),
            reset_noise: 0.0,
            horizon: None,
            reference: ReferenceParams { depth: 0.0, ..cfg.reference },
            human: cfg.human,
            contact: cfg.contact,
            pd: cfg.pd,
            sim_rate_hz: cfg.sim_rate_hz,
            ..EnvConfig::default()
        };
        // The sag shapes the reference, which shapes the equilibrium being
        // measured; two fixed-point passes are enough in practice.
        let mut sag = 0.0;
        for _ in 0..2 {
            let mut env = Self::new_with_sag(exo_spec.clone(), calib.clone(), Some(sag))?;
            env.reset(0)?;
            let hold = Action(env.standing_action().to_vec());
            for _ in 0..45 {
                env.step(&hold).map_err(|e| match e {
                    EnvError::EpisodeFinished => EnvError::Dynamics(
                        DynamicsError::NumericalDivergence("settle calibration fell".into()),
                    ),
                    other => other,
                })?;
            }
            let mount = env.model.joint("h_mount").expect("human mount joint");
            sag = -env.state.q[mount.q_offset];
        }
        Ok(sag)
    }

    fn new_with_sag(
        exo_spec: ModelSpec,
        cfg: EnvConfig,
        forced_sag: Option<f64>,
    ) -> Result<Self, EnvError> {
        match forced_sag {
            None => Self::new(exo_spec, cfg),
            Some(sag) => {
                let nominal = if cfg.mode == Mode::Human {
                    ModelInstance::build(&attach_human(&exo_spec, &cfg.human))?
                } else {
                    ModelInstance::build(&exo_spec)?
                };
                let reference = ReferenceMotion::squat_settled(
                    &nominal,
                    cfg.reference.depth,
                    cfg.reference.cycle,
                    cfg.reference.standing_knee,
                    sag,
                )?;
                Self::assemble(exo_spec, cfg, nominal, reference)
            }
        }
    }

    pub fn obs_dim(&self) -> usize {
        3 * 15 + 3 * 14 + 3 * 6 + 3 * 8 + 6 * 8
    }

    pub fn action_dim(&self) -> usize {
        8
    }

    /// Joint targets of the standing pose.
    pub fn standing_action(&self) -> [f64; 8] {
        self.standing_joints
    }

    /// The base the policy's action offset is applied around: the
    /// reference joint targets at the next control tick. A zero offset
    /// therefore commands reference playback.
    pub fn action_base(&self) -> [f64; 8] {
        self.reference
            .sample_joints(self.state.t + 1.0 / self.cfg.pd.control_rate_hz)
            .0
    }

    pub fn standing_root_z(&self) -> f64 {
        self.standing_root_z
    }

    pub fn reference(&self) -> &ReferenceMotion {
        &self.reference
    }

    pub fn nominal_model(&self) -> &ModelInstance {
        &self.nominal
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn episode_time(&self) -> f64 {
        self.state.t
    }

    /// The currently simulated (randomized, possibly human-coupled) model.
    pub fn model(&self) -> &ModelInstance {
        &self.model
    }

    pub fn state(&self) -> &GeneralizedState {
        &self.state
    }

    pub fn current_draw(&self) -> DynamicsDraw {
        self.draw
    }

    /// Begin a new episode: sample one dynamics draw, rebuild the
    /// (optionally human-coupled) model, reset histories, return the
    /// initial observation.
    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw = self.cfg.randomization.draw(&mut self.rng);

        let mut spec = self
            .exo_spec
            .with_mass_scaled(self.draw.mass)
            .with_inertia_scaled(self.draw.inertia)
            .with_com_scaled(self.draw.com_offset);
        if self.cfg.mode == Mode::Human {
            spec = attach_human(&spec, &self.cfg.human);
        }
        self.model = ModelInstance::build(&spec)?;
        self.ws = self.model.workspace();
        self.contact_params =
            ContactParams { friction: self.cfg.contact.friction * self.draw.friction, ..self.cfg.contact };

        // Start pose: standing, or a random phase of the reference cycle,
        // with small joint noise clamped inside the limits.
        let t0 = match self.cfg.reset_phase {
            ResetPhase::Standing => 0.0,
            ResetPhase::UniformCycle => {
                let ticks = (self.cfg.reference.cycle * self.cfg.pd.control_rate_hz) as u32;
                self.rng.random_range(0..ticks) as f64 / self.cfg.pd.control_rate_hz
            }
        };
        let start = self.reference.sample(&self.nominal, &mut self.ws_ref, t0);
        let mut state = self.model.zero_state();
        state.q[0] = start.root_pos.x;
        state.q[1] = start.root_pos.y;
        state.q[2] = start.root_pos.z;
        for (k, joint) in self.model.actuated().iter().enumerate() {
            let noise = if self.cfg.reset_noise > 0.0 {
                self.rng.random_range(-self.cfg.reset_noise..=self.cfg.reset_noise)
            } else {
                0.0
            };
            let mut angle = start.joints[k] + noise;
            if let Some((lo, hi)) = joint.limits {
                angle = angle.clamp(lo + 1e-3, hi - 1e-3);
            }
            state.q[joint.q_index] = angle;
            state.v[joint.v_index] = start.joint_vels[k];
        }
        // Root velocity from the reference trajectory.
        if t0 > 0.0 {
            let h = 1e-4;
            let ahead = self.reference.sample(&self.nominal, &mut self.ws_ref, t0 + h);
            let vel = (ahead.root_pos - start.root_pos) / h;
            state.v[0] = vel.x;
            state.v[1] = vel.y;
            state.v[2] = vel.z;
        }
        if self.cfg.mode == Mode::Human {
            // The human starts strapped in at the mirrored pose; gravity
            // then settles it onto the pelvis spring by the static sag,
            // which is the configuration the reference is centered for.
            crate::reference::settle_human_chain(&self.model, &mut state.q, &start.joints, 0.0);
        }
        state.t = t0;
        self.episode_start = t0;
        self.state = state;

        self.model.forward_kinematics(&self.state.q, &mut self.ws);
        self.model.velocity_kinematics(&self.state.v, &mut self.ws);
        self.coupling = if self.cfg.mode == Mode::Human {
            Some(HumanCoupling::new(&self.model, self.cfg.human, &self.state, &self.ws))
        } else {
            None
        };
        self.perturbation = if self.cfg.mode == Mode::Perturbed {
            let mut p = PerturbationState::new(&self.model, self.cfg.perturbation);
            p.reset(&mut self.rng);
            Some(p)
        } else {
            None
        };

        let start_action = Action(start.joints.to_vec());
        self.filter.reset(&start_action);
        self.prev_filtered = start_action;

        let nv = self.model.nv();
        self.explicit_torques = DVector::zeros(nv);
        self.implicit_damping = DVector::zeros(nv);

        let sensed = self.sense_current();
        self.ring.clear();
        self.ring.push_back(Snapshot { t: t0, sensed });
        self.sensed_history.clear();
        self.action_history.clear();
        for _ in 0..3 {
            self.sensed_history.push_back(sensed);
            self.action_history.push_back(start.joints);
        }
        self.done = false;
        self.reason = None;
        Ok(self.build_obs())
    }

    /// Advance one control step: filter and interpolate the action, run the
    /// physics substeps with PD torques, contact, perturbation and spring
    /// forces, then score the new state.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        assert_eq!(action.dim(), 8, "action dimension");

        // Clamp to joint limits before any use.
        let mut raw = [0.0; 8];
        for (k, joint) in self.model.actuated().iter().enumerate() {
            let mut a = action.0[k];
            if !a.is_finite() {
                a = self.standing_joints[k];
            }
            if let Some((lo, hi)) = joint.limits {
                a = a.clamp(lo, hi);
            }
            raw[k] = a;
        }
        let filtered = self.filter.apply(&Action(raw.to_vec()));

        let dt = 1.0 / self.cfg.sim_rate_hz;
        let strength = self.draw.motor_strength;
        let mut torque_sum = [0.0; 8];
        let mut torque_peak = [0.0f64; 8];
        let mut perturb_forces = [0.0; 5];
        let mut springs = SpringTelemetry::default();
        let mut diverged = false;

        for sub in 0..self.substeps {
            self.model.forward_kinematics(&self.state.q, &mut self.ws);
            self.model.velocity_kinematics(&self.state.v, &mut self.ws);

            self.external.clear();
            let contact_set = contact_forces(&self.model, &self.contact_params, &self.ws);
            apply_contact_forces(&self.model, &contact_set, &mut self.external);
            if let Some(p) = &mut self.perturbation {
                p.advance(self.state.t, &mut self.rng);
                perturb_forces = p.apply(self.state.t, &mut self.external);
            }
            if let Some(c) = &self.coupling {
                springs = c.apply(&self.model, &self.ws, &mut self.external);
            }

            self.explicit_torques.fill(0.0);
            self.implicit_damping.fill(0.0);
            self.model.limit_terms(&self.state, &mut self.explicit_torques, &mut self.implicit_damping);
            if let Some(c) = &self.coupling {
                c.passive_joint_terms(&self.state, &mut self.explicit_torques, &mut self.implicit_damping);
            }

            let alpha = (sub + 1) as f64 / self.substeps as f64;
            let target = interpolate(&self.prev_filtered, &filtered, alpha);
            let pd: Vec<PdCommand> = self
                .model
                .actuated()
                .iter()
                .enumerate()
                .map(|(k, joint)| PdCommand {
                    v_index: joint.v_index,
                    p_term: strength * self.cfg.pd.kp * (target.0[k] - self.state.q[joint.q_index]),
                    kv: strength * self.cfg.pd.kv,
                    tau_max: joint.torque_limit.min(self.cfg.pd.torque_limit),
                })
                .collect();

            match self.model.step_controlled(
                &self.state,
                &self.explicit_torques,
                &pd,
                &self.implicit_damping,
                &self.external,
                dt,
                &mut self.ws,
                &mut self.applied,
            ) {
                Ok(next) => {
                    self.state = next;
                    for k in 0..8 {
                        torque_sum[k] += self.applied[k];
                        torque_peak[k] = torque_peak[k].max(self.applied[k].abs());
                    }
                }
                Err(DynamicsError::NumericalDivergence(_)) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }

            // Sensor snapshot at the new substep boundary.
            self.model.forward_kinematics(&self.state.q, &mut self.ws);
            self.model.velocity_kinematics(&self.state.v, &mut self.ws);
            let sensed = self.sense_current();
            if self.ring.len() >= 64 {
                self.ring.pop_front();
            }
            self.ring.push_back(Snapshot { t: self.state.t, sensed });
        }
        self.prev_filtered = filtered.clone();

        let torques_mean: [f64; 8] = std::array::from_fn(|k| torque_sum[k] / self.substeps as f64);

        // Post-step measurements and reward.
        let (reward, cop_left, cop_right) = if diverged {
            let dummy = FootCop { foot: 0, cop: [0.0, 0.0], valid: false, distance_to_center: 0.0, total_normal: 0.0 };
            (RewardBreakdown::zeros(), dummy, FootCop { foot: 1, ..dummy })
        } else {
            self.model.forward_kinematics(&self.state.q, &mut self.ws);
            self.model.velocity_kinematics(&self.state.v, &mut self.ws);
            let contact_set = contact_forces(&self.model, &self.contact_params, &self.ws);
            let cops = compute_cop(&contact_set, &self.contact_params, self.cfg.reward.region);

            let target = self.reference.sample(&self.nominal, &mut self.ws_ref, self.state.t);
            let mut joints = [0.0; 8];
            let mut joint_vels = [0.0; 8];
            for (k, joint) in self.model.actuated().iter().enumerate() {
                joints[k] = self.state.q[joint.q_index];
                joint_vels[k] = self.state.v[joint.v_index];
            }
            let root_pos = Vector3::new(self.state.q[0], self.state.q[1], self.state.q[2]);
            let root_quat = UnitQuaternion::from_quaternion(Quaternion::new(
                self.state.q[3],
                self.state.q[4],
                self.state.q[5],
                self.state.q[6],
            ));
            let com = self.model.com_world(&self.ws);
            let left_w = self.ws.poses[self.model.feet()[0].body].pos;
            let right_w = self.ws.poses[self.model.feet()[1].body].pos;
            let inputs = RewardInputs {
                joints: &joints,
                joint_vels: &joint_vels,
                root_pos,
                root_quat,
                com,
                ee_left: self.model.root_relative(&self.ws, &left_w),
                ee_right: self.model.root_relative(&self.ws, &right_w),
                cops: &cops,
                torques: &torques_mean,
            };
            let r = compute_reward(&self.cfg.reward, &target, &inputs);
            (r, cops.feet[0], cops.feet[1])
        };

        // Termination.
        if diverged {
            self.done = true;
            self.reason = Some(TerminationReason::Divergence);
        } else if self.state.q[2] < self.cfg.fall_fraction * self.standing_root_z {
            self.done = true;
            self.reason = Some(TerminationReason::Fall);
        } else if let Some(h) = self.cfg.horizon {
            if self.state.t - self.episode_start >= h - 1e-9 {
                self.done = true;
                self.reason = Some(TerminationReason::Horizon);
            }
        }

        // Histories for the next observation.
        let sensed = self.sense_delayed(self.state.t);
        if self.sensed_history.len() >= 3 {
            self.sensed_history.pop_front();
        }
        self.sensed_history.push_back(sensed);
        if self.action_history.len() >= 3 {
            self.action_history.pop_front();
        }
        self.action_history.push_back(raw);

        let mut joints = [0.0; 8];
        let mut joint_vels = [0.0; 8];
        for (k, joint) in self.model.actuated().iter().enumerate() {
            joints[k] = self.state.q[joint.q_index];
            joint_vels[k] = self.state.v[joint.v_index];
        }
        let (target_joints, _) = self.reference.sample_joints(self.state.t);
        let telemetry = StepTelemetry {
            time: self.state.t,
            joints,
            joint_vels,
            torques: torques_mean,
            torques_peak: torque_peak,
            cop_left,
            cop_right,
            reward,
            perturb_forces,
            springs,
            action_raw: raw,
            action_filtered: std::array::from_fn(|k| filtered.0[k]),
            root_pos: [self.state.q[0], self.state.q[1], self.state.q[2]],
            target_joints,
        };

        Ok(StepOutcome {
            obs: self.build_obs(),
            reward,
            done: self.done,
            reason: self.reason,
            telemetry,
        })
    }

    /// Sensor values of the current state; the workspace must hold current
    /// kinematics.
    fn sense_current(&mut self) -> Sensed {
        let mut q = [0.0; 15];
        let mut v = [0.0; 14];
        // Exoskeleton portion only: the root plus the eight actuated
        // joints. Human-chain coordinates are not observable.
        for k in 0..7 {
            q[k] = self.state.q[k];
        }
        for (k, joint) in self.model.actuated().iter().enumerate() {
            q[7 + k] = self.state.q[joint.q_index];
        }
        for k in 0..6 {
            v[k] = self.state.v[k];
        }
        for (k, joint) in self.model.actuated().iter().enumerate() {
            v[6 + k] = self.state.v[joint.v_index];
        }
        let contact_set = contact_forces(&self.model, &self.contact_params, &self.ws);
        let cops = compute_cop(&contact_set, &self.contact_params, self.cfg.reward.region);
        let mut cop = [0.0; 6];
        for (i, foot) in cops.feet.iter().enumerate().take(2) {
            cop[2 * i] = foot.cop[0];
            cop[2 * i + 1] = foot.cop[1];
            cop[4 + i] = if foot.valid { 1.0 } else { 0.0 };
        }
        Sensed { q, v, cop }
    }

    /// The sensed state at `t − latency`, linearly interpolated between
    /// stored snapshots and clamped at the episode start. Zero latency
    /// returns the newest snapshot bit-exactly.
    fn sense_delayed(&self, t: f64) -> Sensed {
        let latency = self.draw.latency;
        if latency == 0.0 {
            return self.ring.back().expect("ring never empty").sensed;
        }
        let query = t - latency;
        let first = self.ring.front().expect("ring never empty");
        if query <= first.t {
            return first.sensed;
        }
        let mut after = *self.ring.back().unwrap();
        let mut before = after;
        for snap in self.ring.iter().rev() {
            if snap.t <= query {
                before = *snap;
                break;
            }
            after = *snap;
        }
        if after.t <= before.t {
            return before.sensed;
        }
        let alpha = ((query - before.t) / (after.t - before.t)).clamp(0.0, 1.0);
        let mut q = [0.0; 15];
        let mut v = [0.0; 14];
        let mut cop = [0.0; 6];
        for k in 0..15 {
            q[k] = (1.0 - alpha) * before.sensed.q[k] + alpha * after.sensed.q[k];
        }
        // Renormalize the interpolated quaternion components.
        let norm = (q[3] * q[3] + q[4] * q[4] + q[5] * q[5] + q[6] * q[6]).sqrt();
        if norm > 1e-12 {
            for k in 3..7 {
                q[k] /= norm;
            }
        }
        for k in 0..14 {
            v[k] = (1.0 - alpha) * before.sensed.v[k] + alpha * after.sensed.v[k];
        }
        for k in 0..4 {
            cop[k] = (1.0 - alpha) * before.sensed.cop[k] + alpha * after.sensed.cop[k];
        }
        // Contact flags are held rather than interpolated.
        cop[4] = before.sensed.cop[4];
        cop[5] = before.sensed.cop[5];
        Sensed { q, v, cop }
    }

    fn build_obs(&self) -> Observation {
        let mut out = Vec::with_capacity(self.obs_dim());
        for s in &self.sensed_history {
            out.extend_from_slice(&s.q);
        }
        for s in &self.sensed_history {
            out.extend_from_slice(&s.v);
        }
        for s in &self.sensed_history {
            out.extend_from_slice(&s.cop);
        }
        for a in &self.action_history {
            out.extend_from_slice(a);
        }
        for row in self
            .reference
            .future_targets(self.state.t, 6, 1.0 / self.cfg.pd.control_rate_hz)
        {
            out.extend_from_slice(&row);
        }
        debug_assert_eq!(out.len(), self.obs_dim());
        Observation(out)
    }
}
