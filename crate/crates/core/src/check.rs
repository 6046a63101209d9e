//! The analytic self-check suite behind the `check` command: fast
//! verifications of the CoP solver, dynamics conservation laws, the PD
//! law, reward bounds, GAE, gradients, the action filter and the
//! randomization ranges. Each check reports pass/fail with a measured
//! detail string.

use nalgebra::{DVector, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actuation::{pd_torque, Action, ActionFilter, PdConfig};
use crate::contact::{compute_cop, ContactParams, FootForces, SensorForceSet, StableRegion};
use crate::env::randomize::RandomizationSpec;
use crate::env::reward::{compute_reward, RewardConfig, RewardInputs};
use crate::model::default_exoskeleton;
use crate::multibody::{ExternalForceSet, ModelInstance};
use crate::nn::{PolicyValueNet, Tape};
use crate::ppo::{compute_gae, MiniBatchView, PpoConfig};
use crate::reference::ReferenceMotion;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

pub fn run_checks() -> CheckReport {
    let checks = vec![
        cop_weighted_average(),
        cop_tipping_residual(),
        pd_law(),
        free_fall(),
        energy_drift(),
        momentum_rate(),
        reward_bounds(),
        gae_lambda_one(),
        gradient_check(),
        filter_dc_gain(),
        randomization_ranges(),
        reference_periodicity(),
    ];
    let all_passed = checks.iter().all(|c| c.passed);
    CheckReport { checks, all_passed }
}

fn result(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, detail }
}

fn synthetic_foot(sensors: [[f64; 3]; 4], forces: [[f64; 3]; 4]) -> SensorForceSet {
    SensorForceSet {
        feet: vec![FootForces {
            foot: 0,
            sensor_world: sensors,
            force_world: forces,
            normal: [0.0, 0.0, 1.0],
            total_normal: forces.iter().map(|f| f[2]).sum(),
            foot_rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            foot_position: [0.0, 0.0, 0.0],
        }],
    }
}

fn cop_weighted_average() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = ContactParams::default();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut sensors = [[0.0; 3]; 4];
        let mut forces = [[0.0; 3]; 4];
        let mut sum = 0.0;
        let mut weighted = [0.0, 0.0];
        for i in 0..4 {
            let p = [rng.random_range(-0.1..0.1), rng.random_range(-0.06..0.06), 0.0];
            let f = rng.random_range(5.0..200.0);
            sensors[i] = p;
            forces[i] = [0.0, 0.0, f];
            sum += f;
            weighted[0] += p[0] * f;
            weighted[1] += p[1] * f;
        }
        let est = compute_cop(&synthetic_foot(sensors, forces), &params, StableRegion::default());
        let foot = &est.feet[0];
        worst = worst
            .max((foot.cop[0] - weighted[0] / sum).abs())
            .max((foot.cop[1] - weighted[1] / sum).abs());
    }
    result("cop_weighted_average", worst < 1e-9, format!("max deviation {worst:.2e} m"))
}

fn cop_tipping_residual() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = ContactParams::default();
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let mut sensors = [[0.0; 3]; 4];
        let mut forces = [[0.0; 3]; 4];
        let mut total = 0.0;
        for i in 0..4 {
            sensors[i] = [rng.random_range(-0.1..0.1), rng.random_range(-0.06..0.06), 0.0];
            let fz = rng.random_range(10.0..150.0);
            forces[i] = [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), fz];
            total += fz;
        }
        let est = compute_cop(&synthetic_foot(sensors, forces), &params, StableRegion::default());
        let c = Vector3::new(est.feet[0].cop[0], est.feet[0].cop[1], 0.0);
        let mut moment = Vector3::zeros();
        for i in 0..4 {
            moment += (c - Vector3::from(sensors[i])).cross(&Vector3::from(forces[i]));
        }
        worst = worst.max(moment.cross(&Vector3::z()).norm() / total);
    }
    result("cop_tipping_residual", worst < 1e-6, format!("max residual {worst:.2e} N·m per N"))
}

fn pd_law() -> CheckResult {
    let cfg = PdConfig::default();
    let worked = pd_torque(&cfg, &[0.2], &[0.0], &[1.0])[0];
    let mut bound_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let tau = pd_torque(
            &cfg,
            &[rng.random_range(-3.0..3.0)],
            &[rng.random_range(-3.0..3.0)],
            &[rng.random_range(-20.0..20.0)],
        )[0];
        bound_ok &= tau.abs() <= cfg.torque_limit;
    }
    result(
        "pd_law",
        worked == 100.0 && bound_ok,
        format!("worked example {worked} N·m, bound held: {bound_ok}"),
    )
}

fn free_fall() -> CheckResult {
    let model = ModelInstance::build(&default_exoskeleton()).unwrap();
    let mut ws = model.workspace();
    let mut state = model.zero_state();
    state.q[2] += 100.0;
    let z0 = state.q[2];
    let torques = DVector::zeros(model.nv());
    let ext = ExternalForceSet::default();
    for _ in 0..900 {
        state = model.step(&state, &torques, &ext, 1.0 / 900.0, &mut ws).unwrap();
    }
    let drop = z0 - state.q[2];
    let err = (drop - 4.905).abs() / 4.905;
    result("free_fall", err < 0.01, format!("drop {drop:.4} m, error {:.3}%", err * 100.0))
}

fn energy_drift() -> CheckResult {
    let model = ModelInstance::build(&default_exoskeleton()).unwrap();
    let mut ws = model.workspace();
    let mut state = model.zero_state();
    state.q[2] += 100.0;
    for joint in model.actuated() {
        state.v[joint.v_index] = 0.5;
    }
    let mut zeroed = state.clone();
    zeroed.q[2] -= 100.0;
    let e0 = model.mechanical_energy(&zeroed, &mut ws);
    let torques = DVector::zeros(model.nv());
    let ext = ExternalForceSet::default();
    for _ in 0..900 {
        state = model.step(&state, &torques, &ext, 1.0 / 900.0, &mut ws).unwrap();
    }
    let mut rezeroed = state.clone();
    rezeroed.q[2] -= 100.0;
    let e1 = model.mechanical_energy(&rezeroed, &mut ws);
    let drift = (e1 - e0).abs() / e0.abs();
    result("energy_drift", drift < 0.01, format!("{:.4}% over 1 s", drift * 100.0))
}

fn momentum_rate() -> CheckResult {
    let model = ModelInstance::build(&default_exoskeleton())
        .unwrap()
        .with_gravity(Vector3::zeros());
    let mut ws = model.workspace();
    let mut state = model.zero_state();
    for joint in model.actuated() {
        state.v[joint.v_index] = 0.02;
    }
    state.v[0] = 0.3;
    let p0 = model.linear_momentum(&state, &mut ws);
    let torques = DVector::zeros(model.nv());
    let ext = ExternalForceSet::default();
    for _ in 0..900 {
        state = model.step(&state, &torques, &ext, 1.0 / 900.0, &mut ws).unwrap();
    }
    let drift = (model.linear_momentum(&state, &mut ws) - p0).norm();
    result("momentum_conservation", drift < 1e-6, format!("{drift:.2e} kg·m/s over 1 s"))
}

fn reward_bounds() -> CheckResult {
    let model = ModelInstance::build(&default_exoskeleton()).unwrap();
    let reference = ReferenceMotion::squat(&model, 0.25, 4.0, 0.24).unwrap();
    let mut ws = model.workspace();
    let cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    let mut worst_total: f64 = 0.0;
    for _ in 0..1000 {
        let target = reference.sample(&model, &mut ws, rng.random_range(0.0..4.0));
        let joints: [f64; 8] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let joint_vels: [f64; 8] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let torques: [f64; 8] = std::array::from_fn(|_| rng.random_range(-100.0..100.0));
        let cop = crate::contact::CoPEstimate {
            feet: vec![
                crate::contact::FootCop {
                    foot: 0,
                    cop: [rng.random_range(-0.1..0.1), rng.random_range(-0.06..0.06)],
                    valid: rng.random_range(0.0..1.0) > 0.3,
                    distance_to_center: 0.0,
                    total_normal: 100.0,
                },
                crate::contact::FootCop {
                    foot: 1,
                    cop: [rng.random_range(-0.1..0.1), rng.random_range(-0.06..0.06)],
                    valid: rng.random_range(0.0..1.0) > 0.3,
                    distance_to_center: 0.0,
                    total_normal: 100.0,
                },
            ],
            region: cfg.region,
        };
        let inputs = RewardInputs {
            joints: &joints,
            joint_vels: &joint_vels,
            root_pos: Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..1.2),
            ),
            root_quat: nalgebra::UnitQuaternion::from_scaled_axis(Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )),
            com: Vector3::new(0.0, 0.0, rng.random_range(0.0..1.0)),
            ee_left: Vector3::new(0.0, 0.12, rng.random_range(-1.0..0.0)),
            ee_right: Vector3::new(0.0, -0.12, rng.random_range(-1.0..0.0)),
            cops: &cop,
            torques: &torques,
        };
        let r = compute_reward(&cfg, &target, &inputs);
        for term in [r.pose, r.velocity, r.end_effector, r.root, r.com, r.cop, r.torque] {
            ok &= (0.0..=1.0).contains(&term);
        }
        ok &= (0.0..=3.6 + 1e-12).contains(&r.total);
        worst_total = worst_total.max(r.total);
    }
    result("reward_bounds", ok, format!("all terms in [0,1], max total {worst_total:.3} of 3.6"))
}

fn gae_lambda_one() -> CheckResult {
    let rewards = [1.0, 0.5, -0.25, 2.0, 0.75];
    let values = [0.3, -0.1, 0.4, 0.2, 0.6];
    let dones = [false, false, false, false, true];
    let gamma = 0.99;
    let (adv, _) = compute_gae(&rewards, &values, &dones, 0.0, gamma, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..5 {
        let mut discounted = 0.0;
        for (k, r) in rewards[t..].iter().enumerate() {
            discounted += gamma.powi(k as i32) * r;
        }
        worst = worst.max((adv[t] - (discounted - values[t])).abs());
    }
    result("gae_lambda_one", worst < 1e-10, format!("max deviation {worst:.2e}"))
}

fn gradient_check() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = PolicyValueNet::init(8, 8, &[8], &mut rng, 0.5);
    let cfg = PpoConfig { clip_epsilon: 0.2, value_coef: 0.5, entropy_coef: 0.01, ..Default::default() };
    let mut obs = Vec::new();
    let mut actions = Vec::new();
    let mut lps = Vec::new();
    let mut advs = Vec::new();
    let mut rets = Vec::new();
    let mut pt = Tape::default();
    let mut vt = Tape::default();
    for _ in 0..16 {
        let o: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (dist, _) = net.forward(&o, &mut pt, &mut vt).unwrap();
        let a = dist.sample(&mut rng);
        let lp = dist.log_prob(&a) + rng.random_range(-0.05..0.05);
        obs.push(o);
        actions.push(a);
        lps.push(lp);
        advs.push(rng.random_range(-1.5..1.5));
        rets.push(rng.random_range(-1.0..1.0));
    }
    let view = MiniBatchView {
        obs: &obs,
        actions: &actions,
        log_probs_old: &lps,
        advantages: &advs,
        returns: &rets,
    };
    let mut grads = vec![0.0; net.param_count()];
    crate::ppo::update::minibatch_gradient(&net, &view, &cfg, &mut grads).unwrap();

    let h = 1e-5;
    let mut max_rel: f64 = 0.0;
    let mut tmp = vec![0.0; net.param_count()];
    for k in 0..net.param_count() {
        let shift = |delta: f64, net: &mut PolicyValueNet| {
            net.apply_update(&mut |i, p| {
                if i == k {
                    *p += delta;
                }
            });
        };
        shift(h, &mut net);
        let (fp, _) = crate::ppo::update::minibatch_gradient(&net, &view, &cfg, &mut tmp).unwrap();
        shift(-2.0 * h, &mut net);
        let (fm, _) = crate::ppo::update::minibatch_gradient(&net, &view, &cfg, &mut tmp).unwrap();
        shift(h, &mut net);
        let fd = (fp - fm) / (2.0 * h);
        let denom = fd.abs().max(grads[k].abs()).max(1e-6);
        max_rel = max_rel.max((fd - grads[k]).abs() / denom);
    }
    result("gradient_check", max_rel < 1e-4, format!("max relative error {max_rel:.2e}"))
}

fn filter_dc_gain() -> CheckResult {
    let cfg = PdConfig::default();
    let mut filter = ActionFilter::new(&cfg, 1);
    filter.reset(&Action::zeros(1));
    let mut out = 0.0;
    for _ in 0..400 {
        out = filter.apply(&Action(vec![0.7])).0[0];
    }
    let err = (out - 0.7).abs();
    result("filter_dc_gain", err < 1e-6, format!("steady-state error {err:.2e}"))
}

fn randomization_ranges() -> CheckResult {
    let spec = RandomizationSpec::train();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ok = true;
    let mut sum = 0.0;
    let n = 1000;
    for _ in 0..n {
        let draw = spec.draw(&mut rng);
        ok &= draw.within(&spec);
        sum += draw.friction;
    }
    let mean = sum / n as f64;
    ok &= (mean - 1.25).abs() < 0.02;
    result("randomization_ranges", ok, format!("friction mean {mean:.4}, all draws in range"))
}

fn reference_periodicity() -> CheckResult {
    let model = ModelInstance::build(&default_exoskeleton()).unwrap();
    let motion = ReferenceMotion::squat(&model, 0.25, 4.0, 0.24).unwrap();
    let (j0, v0) = motion.sample_joints(0.0);
    let (j1, v1) = motion.sample_joints(4.0);
    let mut worst: f64 = 0.0;
    for k in 0..8 {
        worst = worst.max((j0[k] - j1[k]).abs()).max((v0[k] - v1[k]).abs());
    }
    result("reference_periodicity", worst < 1e-9, format!("seam mismatch {worst:.2e}"))
}
