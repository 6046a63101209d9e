use exosquat_core::actuation::Action;
use exosquat_core::env::randomize::RandomizationSpec;
use exosquat_core::env::{EnvConfig, ResetPhase, SquatEnv};
use exosquat_core::model::default_exoskeleton;
use exosquat_core::nn::policy::standard_normal;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let sigma: f64 = std::env::args().nth(1).map(|v| v.parse().unwrap()).unwrap_or(0.135);
    let env_cfg = EnvConfig {
        randomization: RandomizationSpec::nominal(),
        reset_phase: ResetPhase::UniformCycle,
        ..EnvConfig::default()
    };
    let mut env = SquatEnv::new(default_exoskeleton(), env_cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut falls = 0;
    let mut episodes = 0;
    let mut reward_sum = 0.0;
    let mut steps = 0usize;
    for seed in 0..20 {
        env.reset(seed).unwrap();
        episodes += 1;
        for _ in 0..240 {
            let (targets, _) = env.reference().sample_joints(env.episode_time() + 1.0 / 30.0);
            let noisy: Vec<f64> = targets.iter().map(|t| t + sigma * standard_normal(&mut rng)).collect();
            let out = env.step(&Action(noisy)).unwrap();
            reward_sum += out.reward.total;
            steps += 1;
            if out.done {
                if out.reason == Some(exosquat_core::env::TerminationReason::Fall) { falls += 1; }
                break;
            }
        }
    }
    println!("sigma {sigma}: {falls}/{episodes} falls, mean step reward {:.3}", reward_sum / steps as f64);
}
