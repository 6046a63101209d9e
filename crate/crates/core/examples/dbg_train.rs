use exosquat_core::env::randomize::RandomizationSpec;
use exosquat_core::env::{EnvConfig, SquatEnv};
use exosquat_core::model::default_exoskeleton;
use exosquat_core::ppo::{train, PpoConfig};

fn main() {
    let depth: f64 = std::env::args().nth(1).map(|v| v.parse().unwrap()).unwrap_or(0.25);
    let budget: u64 = std::env::args().nth(2).map(|v| v.parse().unwrap()).unwrap_or(200_000);
    let env_cfg = EnvConfig {
        randomization: RandomizationSpec::nominal(),
        reference: exosquat_core::env::ReferenceParams { depth, ..Default::default() },
        reset_phase: exosquat_core::env::ResetPhase::UniformCycle,
        ..EnvConfig::default()
    };
    let log_std: f64 = std::env::args().nth(3).map(|v| v.parse().unwrap()).unwrap_or(-2.0);
    let lr: f64 = std::env::args().nth(4).map(|v| v.parse().unwrap()).unwrap_or(3e-4);
    let entropy: f64 = std::env::args().nth(5).map(|v| v.parse().unwrap()).unwrap_or(0.0);
    let cfg = PpoConfig { sample_budget: budget, seed: 7, log_std_init: log_std, learning_rate: lr, entropy_coef: entropy, ..PpoConfig::desk() };
    let spec = default_exoskeleton();
    let start = std::time::Instant::now();
    let out = train(&spec, &env_cfg, &cfg, None, &mut |p| {
        if p.iteration % 10 == 0 || p.iteration <= 3 {
            println!("iter {:4} samples {:7} mean_step_reward {:.3}", p.iteration, p.samples, p.mean_step_reward);
        }
        true
    })
    .unwrap();
    let last = out.log.last().unwrap();
    println!(
        "done in {:.1}s: {} samples, final mean_step_reward {:.3}, mean_ep_len {:.1}, falls {}, log_std {:.2}",
        start.elapsed().as_secs_f64(), out.samples, last.mean_step_reward, last.mean_episode_length, last.falls, last.mean_log_std
    );
    // quick eval: play mean policy for 3 cycles
    let eval_cfg = EnvConfig {
        randomization: RandomizationSpec::nominal(),
        reset_noise: 0.0,
        horizon: None,
        reference: exosquat_core::env::ReferenceParams { depth, ..Default::default() },
        ..EnvConfig::default()
    };
    let mut env = SquatEnv::new(spec, eval_cfg).unwrap();
    let driver = exosquat_core::ppo::PolicyDriver {
        net: out.final_net,
        normalizer: out.final_normalizer,
    };
    let mut tape = exosquat_core::nn::Tape::default();
    let mut obs = env.reset(999).unwrap();
    let mut reward_sum = 0.0;
    let mut in_region = 0usize;
    let mut count = 0usize;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut max_x: f64 = 0.0;
    let mut max_y: f64 = 0.0;
    let mut out_x = 0usize;
    let mut out_y = 0usize;
    let mut invalid = 0usize;
    for k in 0..360 {
        let action = driver.act_mean(&obs.0, &env.action_base(), &mut tape);
        let out = env.step(&action).unwrap();
        reward_sum += out.reward.total;
        for cop in [out.telemetry.cop_left, out.telemetry.cop_right] {
            count += 1;
            if !cop.valid { invalid += 1; continue; }
            sum_x += cop.cop[0]; sum_y += cop.cop[1];
            max_x = max_x.max(cop.cop[0].abs());
            max_y = max_y.max(cop.cop[1].abs());
            if cop.cop[0].abs() > 0.055 { out_x += 1; }
            if cop.cop[1].abs() > 0.035 { out_y += 1; }
            if cop.valid && cop.cop[0].abs() <= 0.055 && cop.cop[1].abs() <= 0.035 { in_region += 1; }
        }
        if k % 60 == 0 {
            println!("  k={k}: copL=({:+.3},{:+.3}) copR=({:+.3},{:+.3}) root=({:+.3},{:+.3},{:.3}) r={:.2}",
                out.telemetry.cop_left.cop[0], out.telemetry.cop_left.cop[1],
                out.telemetry.cop_right.cop[0], out.telemetry.cop_right.cop[1],
                out.telemetry.root_pos[0], out.telemetry.root_pos[1], out.telemetry.root_pos[2], out.reward.total);
        }
        obs = out.obs;
        if out.done { println!("eval fell at step {k} ({:?})", out.reason); return; }
    }
    println!("eval: 3 cycles no fall, mean reward {:.3}, cop in-region {:.3}", reward_sum / 360.0, in_region as f64 / count as f64);
    println!("cop stats: mean=({:+.4},{:+.4}) max=({:.4},{:.4}) out_x={} out_y={} invalid={} of {count}",
        sum_x / (count - invalid).max(1) as f64, sum_y / (count - invalid).max(1) as f64, max_x, max_y, out_x, out_y, invalid);
}
