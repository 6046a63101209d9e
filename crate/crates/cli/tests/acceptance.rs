//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured values. The training smoke test runs the full
//! desk-scale budget and is the long pole; everything else is fast.

use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use exosquat_core::actuation::{pd_torque, PdConfig};
use exosquat_core::config::RunConfig;
use exosquat_core::contact::{compute_cop, ContactParams, FootForces, SensorForceSet, StableRegion};
use exosquat_core::env::perturb::{PerturbationSpec, PerturbationState};
use exosquat_core::env::randomize::RandomizationSpec;
use exosquat_core::model::default_exoskeleton;
use exosquat_core::multibody::{ExternalForceSet, ModelInstance};
use exosquat_core::nn::PolicyValueNet;
use exosquat_core::ppo::{compute_gae, update::minibatch_gradient, MiniBatchView, PpoConfig};
use exosquat_core::runner::{eval_run, sweep_run, train_run, Controller};
use nalgebra::{DVector, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(criterion: u32, name: &str, detail: String) {
    println!("ACCEPTANCE {criterion} {name}: PASS ({detail})");
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("exosquat-acc-{tag}-{}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
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

/// Criterion 1: the CoP solver agrees with the force-weighted-average
/// oracle on pure normal loading and zeroes the tipping moment on mixed
/// loading, inside a one-second budget.
#[test]
fn acceptance_1_cop_oracle_equivalence() {
    let start = std::time::Instant::now();
    let params = ContactParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst_avg: f64 = 0.0;
    for _ in 0..1000 {
        let mut sensors = [[0.0; 3]; 4];
        let mut forces = [[0.0; 3]; 4];
        let mut sum = 0.0;
        let mut wx = 0.0;
        let mut wy = 0.0;
        for i in 0..4 {
            sensors[i] = [rng.random_range(-0.1..0.1), rng.random_range(-0.06..0.06), 0.0];
            let f = rng.random_range(5.0..200.0);
            forces[i] = [0.0, 0.0, f];
            sum += f;
            wx += sensors[i][0] * f;
            wy += sensors[i][1] * f;
        }
        let est = compute_cop(&synthetic_foot(sensors, forces), &params, StableRegion::default());
        worst_avg = worst_avg
            .max((est.feet[0].cop[0] - wx / sum).abs())
            .max((est.feet[0].cop[1] - wy / sum).abs());
    }
    assert!(worst_avg < 1e-9, "weighted-average deviation {worst_avg}");

    let mut worst_residual: f64 = 0.0;
    for _ in 0..1000 {
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
        worst_residual = worst_residual.max(moment.cross(&Vector3::z()).norm() / total);
    }
    assert!(worst_residual < 1e-6, "tipping residual {worst_residual}");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "runtime {elapsed:.3} s exceeds 1 s");
    pass(
        1,
        "cop_oracle_equivalence",
        format!("avg dev {worst_avg:.2e} m, residual {worst_residual:.2e} N·m/N, {elapsed:.2} s"),
    );
}

/// Criterion 2: free fall, passive-chain energy drift and momentum
/// conservation, inside ten seconds.
#[test]
fn acceptance_2_dynamics_sanity() {
    let start = std::time::Instant::now();
    let dt = 1.0 / 900.0;

    let model = ModelInstance::build(&default_exoskeleton()).unwrap();
    let mut ws = model.workspace();
    let mut state = model.zero_state();
    state.q[2] += 100.0;
    let z0 = state.q[2];
    let zeros = DVector::zeros(model.nv());
    let ext = ExternalForceSet::default();
    for _ in 0..900 {
        state = model.step(&state, &zeros, &ext, dt, &mut ws).unwrap();
    }
    let drop = z0 - state.q[2];
    let drop_err = (drop - 4.905).abs() / 4.905;
    assert!(drop_err < 0.01, "free-fall drop {drop}");

    let mut state = model.zero_state();
    state.q[2] += 100.0;
    for joint in model.actuated() {
        state.v[joint.v_index] = 0.5;
    }
    let mut zeroed = state.clone();
    zeroed.q[2] -= 100.0;
    let e0 = model.mechanical_energy(&zeroed, &mut ws);
    for _ in 0..900 {
        state = model.step(&state, &zeros, &ext, dt, &mut ws).unwrap();
    }
    let mut rezeroed = state.clone();
    rezeroed.q[2] -= 100.0;
    let drift = (model.mechanical_energy(&rezeroed, &mut ws) - e0).abs() / e0.abs();
    assert!(drift < 0.01, "energy drift {drift}");

    let free = ModelInstance::build(&default_exoskeleton())
        .unwrap()
        .with_gravity(Vector3::zeros());
    let mut ws = free.workspace();
    let mut state = free.zero_state();
    for joint in free.actuated() {
        state.v[joint.v_index] = 0.02;
    }
    state.v[0] = 0.3;
    let p0 = free.linear_momentum(&state, &mut ws);
    for _ in 0..900 {
        state = free.step(&state, &zeros, &ext, dt, &mut ws).unwrap();
    }
    let momentum_drift = (free.linear_momentum(&state, &mut ws) - p0).norm();
    assert!(momentum_drift < 1e-6, "momentum drift {momentum_drift}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.2} s exceeds 10 s");
    pass(
        2,
        "dynamics_sanity",
        format!(
            "drop err {:.3}%, energy drift {:.3}%, momentum {momentum_drift:.2e} kg·m/s, {elapsed:.1} s",
            drop_err * 100.0,
            drift * 100.0
        ),
    );
}

/// Criterion 3: the PD law respects the torque bound everywhere and the
/// worked example holds exactly.
#[test]
fn acceptance_3_pd_law() {
    let cfg = PdConfig::default();
    let worked = pd_torque(&cfg, &[0.2], &[0.0], &[1.0])[0];
    assert_eq!(worked, 100.0, "worked example must clip to exactly 100 N·m");

    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    for _ in 0..100_000 {
        let tau = pd_torque(
            &cfg,
            &[rng.random_range(-6.0..6.0)],
            &[rng.random_range(-6.0..6.0)],
            &[rng.random_range(-60.0..60.0)],
        )[0];
        assert!(tau.abs() <= 100.0, "torque {tau} exceeded the bound");
    }
    pass(3, "pd_law", format!("worked example {worked} N·m, 100k random inputs within ±100"));
}

/// Criterion 4: every reward term stays in [0, 1], the total in [0, 3.6],
/// and the CoP term is zero outside the stable region, over 10k fuzzed
/// states.
#[test]
fn acceptance_4_reward_bounds() {
    use exosquat_core::contact::{CoPEstimate, FootCop};
    use exosquat_core::env::reward::{compute_reward, RewardConfig, RewardInputs};
    use exosquat_core::reference::ReferenceMotion;

    let model = ModelInstance::build(&default_exoskeleton()).unwrap();
    let reference = ReferenceMotion::squat(&model, 0.25, 4.0, 0.24).unwrap();
    let mut ws = model.workspace();
    let cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut outside_checked = 0usize;
    for _ in 0..10_000 {
        let target = reference.sample(&model, &mut ws, rng.random_range(0.0..4.0));
        let joints: [f64; 8] = std::array::from_fn(|_| rng.random_range(-2.5..2.5));
        let joint_vels: [f64; 8] = std::array::from_fn(|_| rng.random_range(-15.0..15.0));
        let torques: [f64; 8] = std::array::from_fn(|_| rng.random_range(-100.0..100.0));
        let both_outside = rng.random_range(0.0..1.0) < 0.3;
        let mk_cop = |foot: usize, rng: &mut ChaCha8Rng| {
            let cop = if both_outside {
                [0.056 + rng.random_range(0.0..0.05), rng.random_range(-0.1..0.1)]
            } else {
                [rng.random_range(-0.1..0.1), rng.random_range(-0.06..0.06)]
            };
            FootCop {
                foot,
                cop,
                valid: rng.random_range(0.0..1.0) > 0.25,
                distance_to_center: (cop[0] * cop[0] + cop[1] * cop[1]).sqrt(),
                total_normal: 100.0,
            }
        };
        let cops = CoPEstimate {
            feet: vec![mk_cop(0, &mut rng), mk_cop(1, &mut rng)],
            region: cfg.region,
        };
        let inputs = RewardInputs {
            joints: &joints,
            joint_vels: &joint_vels,
            root_pos: Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-0.5..1.5),
            ),
            root_quat: nalgebra::UnitQuaternion::from_scaled_axis(Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            )),
            com: Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..1.2),
            ),
            ee_left: Vector3::new(rng.random_range(-1.0..1.0), 0.12, rng.random_range(-1.0..0.0)),
            ee_right: Vector3::new(rng.random_range(-1.0..1.0), -0.12, rng.random_range(-1.0..0.0)),
            cops: &cops,
            torques: &torques,
        };
        let r = compute_reward(&cfg, &target, &inputs);
        for term in [r.pose, r.velocity, r.end_effector, r.root, r.com, r.cop, r.torque] {
            assert!((0.0..=1.0).contains(&term), "term {term} out of [0,1]");
        }
        assert!((0.0..=3.6 + 1e-12).contains(&r.total), "total {} out of range", r.total);
        if both_outside {
            assert_eq!(r.cop, 0.0, "CoP reward must be zero outside the stable region");
            outside_checked += 1;
        }
    }
    pass(4, "reward_bounds", format!("10k states, {outside_checked} outside-region cases all zero"));
}

/// Criterion 5: PPO surrogate and value-loss gradients match central
/// finite differences on an (8, 8) network with a 16-sample batch, inside
/// thirty seconds.
#[test]
fn acceptance_5_gradient_checks() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut net = PolicyValueNet::init(8, 8, &[8], &mut rng, 0.5);
    let cfg = PpoConfig { clip_epsilon: 0.2, value_coef: 0.5, entropy_coef: 0.01, ..Default::default() };
    let mut obs = Vec::new();
    let mut actions = Vec::new();
    let mut lps = Vec::new();
    let mut advs = Vec::new();
    let mut rets = Vec::new();
    let mut pt = exosquat_core::nn::Tape::default();
    let mut vt = exosquat_core::nn::Tape::default();
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
    minibatch_gradient(&net, &view, &cfg, &mut grads).unwrap();

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
        let (fp, _) = minibatch_gradient(&net, &view, &cfg, &mut tmp).unwrap();
        shift(-2.0 * h, &mut net);
        let (fm, _) = minibatch_gradient(&net, &view, &cfg, &mut tmp).unwrap();
        shift(h, &mut net);
        let fd = (fp - fm) / (2.0 * h);
        let denom = fd.abs().max(grads[k].abs()).max(1e-6);
        max_rel = max_rel.max((fd - grads[k]).abs() / denom);
    }
    assert!(max_rel < 1e-4, "relative gradient error {max_rel}");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.1} s exceeds 30 s");
    pass(5, "gradient_checks", format!("max relative error {max_rel:.2e}, {elapsed:.2} s"));
}

/// Criterion 6: GAE at λ = 1 equals discounted return minus baseline on a
/// hand-built five-step episode, to 1e-10.
#[test]
fn acceptance_6_gae_equivalence() {
    let rewards = [1.0, 0.5, -0.25, 2.0, 0.75];
    let values = [0.3, -0.1, 0.4, 0.2, 0.6];
    let dones = [false, false, false, false, true];
    let gamma = 0.97;
    let (adv, _) = compute_gae(&rewards, &values, &dones, 7.0, gamma, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..5 {
        let mut discounted = 0.0;
        for (k, r) in rewards[t..].iter().enumerate() {
            discounted += gamma.powi(k as i32) * r;
        }
        worst = worst.max((adv[t] - (discounted - values[t])).abs());
    }
    assert!(worst < 1e-10, "deviation {worst}");
    pass(6, "gae_equivalence", format!("max deviation {worst:.2e}"));
}

/// Criterion 7: 10k draws per parameter stay inside the train ranges with
/// empirical means within 1% of the range centers.
#[test]
fn acceptance_7_randomization_ranges() {
    let spec = RandomizationSpec::train();
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let n = 10_000;
    let mut sums = [0.0; 6];
    for _ in 0..n {
        let d = spec.draw(&mut rng);
        assert!(d.within(&spec), "draw escaped the configured ranges");
        sums[0] += d.friction;
        sums[1] += d.mass;
        sums[2] += d.motor_strength;
        sums[3] += d.latency;
        sums[4] += d.inertia;
        sums[5] += d.com_offset;
    }
    let centers = [
        spec.friction.center(),
        spec.mass.center(),
        spec.motor_strength.center(),
        spec.latency.center(),
        spec.inertia.center(),
        spec.com_offset.center(),
    ];
    let names = ["friction", "mass", "motor_strength", "latency", "inertia", "com_offset"];
    let mut detail = String::new();
    for i in 0..6 {
        let mean = sums[i] / n as f64;
        let tolerance = 0.01 * centers[i].abs().max(0.01);
        assert!(
            (mean - centers[i]).abs() < tolerance,
            "{} mean {mean} vs center {}",
            names[i],
            centers[i]
        );
        detail.push_str(&format!("{}={:.4} ", names[i], mean));
    }
    pass(7, "randomization_ranges", format!("10k draws per parameter, means {detail}"));
}

/// Criterion 8: desk-scale training smoke. Mean per-step reward improves
/// at least 50% over the first-iteration baseline; the trained policy
/// completes three squat cycles with no fall and a both-feet CoP in-region
/// fraction of at least 0.90; all torques respect the 100 N·m bound; the
/// action traces are cyclic with an autocorrelation peak at the 4 s cycle.
#[test]
fn acceptance_8_training_smoke() {
    let start = std::time::Instant::now();
    let dir = temp_dir("train-smoke");
    let cfg = RunConfig::desk();
    assert_eq!(cfg.ppo.sample_budget, 2_000_000);
    assert_eq!(cfg.ppo.hidden, vec![64, 64]);

    let cancel = Arc::new(AtomicBool::new(false));
    let summary = train_run(&cfg, &dir, &cancel, &mut |_| {}).unwrap();
    assert!(summary.samples >= 2_000_000);
    assert!(
        summary.improvement >= 0.50,
        "mean per-step reward improved only {:.1}% (baseline {:.3}, final {:.3})",
        summary.improvement * 100.0,
        summary.baseline_step_reward,
        summary.final_step_reward
    );

    let mut eval_cfg = cfg.clone();
    eval_cfg.eval_cycles = 3;
    eval_cfg.env.reset_noise = 0.0;
    let eval_dir = dir.join("eval");
    let controller = Controller::Checkpoint(summary.final_checkpoint.clone());
    let eval = eval_run(&eval_cfg, &controller, &eval_dir, &mut |_| {}).unwrap();
    assert!(!eval.fell, "trained policy fell during the three-cycle evaluation");
    assert!(eval.report.cycles_completed >= 3, "completed {} cycles", eval.report.cycles_completed);
    assert!(
        eval.report.cop_in_region_both >= 0.90,
        "both-feet CoP in-region fraction {:.3}",
        eval.report.cop_in_region_both
    );
    for peak in &eval.report.peak_torque {
        assert!(
            peak.peak_abs_torque <= 100.0 + 1e-9,
            "{} peaked at {:.1} N·m",
            peak.joint,
            peak.peak_abs_torque
        );
    }

    // Cyclic action traces: mean-centered autocorrelation over the sagittal
    // joints must peak at the 4 s cycle period.
    let rows = exosquat_core::telemetry::read_telemetry(&eval.telemetry.clone().unwrap()).unwrap();
    let series: Vec<Vec<f64>> = (0..6)
        .map(|j| rows.iter().map(|t| t.action_raw[j]).collect())
        .collect();
    let cycle_lag = 120usize;
    let mut best_lag = 0;
    let mut best_rho = f64::MIN;
    for lag in 60..=180 {
        let mut rho_sum = 0.0;
        let mut used = 0;
        for s in &series {
            if let Some(r) = autocorrelation(s, lag) {
                rho_sum += r;
                used += 1;
            }
        }
        if used > 0 {
            let rho = rho_sum / used as f64;
            if rho > best_rho {
                best_rho = rho;
                best_lag = lag;
            }
        }
    }
    let lag_seconds = best_lag as f64 / 30.0;
    assert!(
        (best_lag as i64 - cycle_lag as i64).unsigned_abs() <= 15,
        "autocorrelation peak at {lag_seconds:.2} s, expected near 4 s"
    );
    assert!(best_rho > 0.5, "autocorrelation peak {best_rho:.2} too weak for a cyclic trace");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 4.0 * 3600.0, "runtime {elapsed:.0} s exceeds 4 h");
    pass(
        8,
        "training_smoke",
        format!(
            "improvement {:.0}% ({:.3} to {:.3}), 3 cycles no fall, CoP in-region {:.3}, peak torque {:.1} N·m, cycle autocorrelation {:.2} at {:.2} s, {:.0} s total",
            summary.improvement * 100.0,
            summary.baseline_step_reward,
            summary.final_step_reward,
            eval.report.cop_in_region_both,
            eval.report
                .peak_torque
                .iter()
                .map(|p| p.peak_abs_torque)
                .fold(0.0, f64::max),
            best_rho,
            lag_seconds,
            elapsed
        ),
    );
    std::fs::remove_dir_all(&dir).ok();
}

fn autocorrelation(series: &[f64], lag: usize) -> Option<f64> {
    if series.len() <= lag + 8 {
        return None;
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var < 1e-10 {
        return None;
    }
    let mut acc = 0.0;
    for t in 0..n - lag {
        acc += (series[t] - mean) * (series[t + lag] - mean);
    }
    Some(acc / ((n - lag) as f64 * var))
}

/// Criterion 9: hip perturbation directions stay within 20 degrees of
/// vertical, magnitudes within (0, 200) N, and the 1.75x stress preset
/// reaches 350 N.
#[test]
fn acceptance_9_perturbation_protocol() {
    let spec = PerturbationSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let cos_min = 20f64.to_radians().cos();
    for _ in 0..10_000 {
        let d = spec.sample_hip_direction(&mut rng);
        assert!(d.z >= cos_min - 1e-12, "direction {d:?} outside the cone");
    }

    let model = ModelInstance::build(&default_exoskeleton()).unwrap();
    let mut state = PerturbationState::new(&model, spec);
    state.reset(&mut rng);
    let mut t = 0.0;
    let mut hip_peak: f64 = 0.0;
    for _ in 0..20_000 {
        t += 1.0 / 30.0;
        state.advance(t, &mut rng);
        let f = state.forces_at(t);
        assert!(f[0].norm() <= 200.0 + 1e-9);
        for limb in &f[1..] {
            assert!(limb.norm() <= 100.0 + 1e-9);
        }
        hip_peak = hip_peak.max(f[0].norm());
    }

    let mut stress = PerturbationState::new(&model, PerturbationSpec::default().stress());
    stress.reset(&mut rng);
    let mut t = 0.0;
    let mut stress_peak: f64 = 0.0;
    for _ in 0..20_000 {
        t += 1.0 / 30.0;
        stress.advance(t, &mut rng);
        let f = stress.forces_at(t)[0].norm();
        assert!(f <= 350.0 + 1e-9);
        stress_peak = stress_peak.max(f);
    }
    assert!(stress_peak > 330.0, "stress preset peaked at only {stress_peak} N");
    pass(
        9,
        "perturbation_protocol",
        format!("10k cone directions ok, hip peak {hip_peak:.0} N, stress peak {stress_peak:.0} N of 350"),
    );
}

/// Criterion 10: `sweep --envs 200` produces exactly 200 rows with
/// test-range parameters and is bit-reproducible under a fixed seed.
#[test]
fn acceptance_10_sweep_mechanics() {
    let dir_a = temp_dir("sweep-a");
    let dir_b = temp_dir("sweep-b");
    let mut cfg = RunConfig::desk();
    cfg.sweep_envs = 200;
    cfg.seed = 33;
    let cancel = Arc::new(AtomicBool::new(false));
    let a = sweep_run(&cfg, &Controller::Playback, &dir_a, &cancel, &mut |_| {}).unwrap();
    let b = sweep_run(&cfg, &Controller::Playback, &dir_b, &cancel, &mut |_| {}).unwrap();

    assert_eq!(a.rows.len(), 200);
    let test_ranges = RandomizationSpec::test();
    for (k, row) in a.rows.iter().enumerate() {
        assert_eq!(row.env_id, k, "dense environment ids");
        assert!(row.draw.within(&test_ranges), "draw outside the test ranges: {:?}", row.draw);
    }
    let text_a = std::fs::read_to_string(&a.csv).unwrap();
    let text_b = std::fs::read_to_string(&b.csv).unwrap();
    assert_eq!(text_a.lines().count(), 201, "header plus exactly 200 rows");
    assert_eq!(text_a, text_b, "sweep must be reproducible under a fixed seed");
    pass(
        10,
        "sweep_mechanics",
        format!("200 rows, test-range draws, mean cycle reward {:.3}, reproducible", a.mean_reward),
    );
    std::fs::remove_dir_all(&dir_a).ok();
    std::fs::remove_dir_all(&dir_b).ok();
}

/// Criterion 11: fixed seeds reproduce training logs and evaluation
/// telemetry bit-identically.
#[test]
fn acceptance_11_determinism() {
    let mut cfg = RunConfig::desk();
    cfg.ppo.sample_budget = 3 * 2048;
    cfg.seed = 99;
    cfg.ppo.seed = 99;
    let cancel = Arc::new(AtomicBool::new(false));

    let dir_a = temp_dir("det-a");
    let dir_b = temp_dir("det-b");
    let a = train_run(&cfg, &dir_a, &cancel, &mut |_| {}).unwrap();
    let b = train_run(&cfg, &dir_b, &cancel, &mut |_| {}).unwrap();
    let log_a = std::fs::read_to_string(&a.training_log).unwrap();
    let log_b = std::fs::read_to_string(&b.training_log).unwrap();
    assert_eq!(log_a, log_b, "training logs must be bit-identical");

    let mut eval_cfg = RunConfig::desk();
    eval_cfg.eval_cycles = 1;
    eval_cfg.seed = 4;
    let ea = eval_run(&eval_cfg, &Controller::Playback, &dir_a.join("eval"), &mut |_| {}).unwrap();
    let eb = eval_run(&eval_cfg, &Controller::Playback, &dir_b.join("eval"), &mut |_| {}).unwrap();
    let ta = std::fs::read_to_string(ea.telemetry.unwrap()).unwrap();
    let tb = std::fs::read_to_string(eb.telemetry.unwrap()).unwrap();
    assert_eq!(ta, tb, "evaluation telemetry must be bit-identical");
    pass(
        11,
        "determinism",
        format!("3-iteration training logs and {}-row telemetry identical", ta.lines().count() - 1),
    );
    std::fs::remove_dir_all(&dir_a).ok();
    std::fs::remove_dir_all(&dir_b).ok();
}
