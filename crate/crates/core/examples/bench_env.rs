use exosquat_core::actuation::Action;
use exosquat_core::env::randomize::RandomizationSpec;
use exosquat_core::env::{EnvConfig, SquatEnv};
use exosquat_core::model::default_exoskeleton;

fn main() {
    let cfg = EnvConfig {
        randomization: RandomizationSpec::nominal(),
        reset_noise: 0.0,
        horizon: None,
        ..EnvConfig::default()
    };
    let mut env = SquatEnv::new(default_exoskeleton(), cfg).unwrap();
    env.reset(1).unwrap();
    let n = 6000;
    let start = std::time::Instant::now();
    for k in 0..n {
        let (targets, _) = env.reference().sample_joints((k + 1) as f64 / 30.0);
        let out = env.step(&Action(targets.to_vec())).unwrap();
        if out.done {
            env.reset(k as u64).unwrap();
        }
    }
    let dt = start.elapsed().as_secs_f64();
    println!(
        "{n} control steps in {dt:.2} s = {:.0} steps/s = {:.1} us/substep",
        n as f64 / dt,
        dt / n as f64 * 1e6 / 30.0
    );
}
