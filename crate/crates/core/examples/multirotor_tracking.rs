//! Figure-eight tracking by a sampling-based controller while actuator
//! health degrades, with a physics prior forecasting the next position.
//!
//! Run with `cargo run --release --example multirotor_tracking`.

use std::path::PathBuf;

use adaptnc::envs::multirotor::{X, Y};
use adaptnc::envs::{EnvConfig, Environment, MultirotorEnv};
use adaptnc::experiment::{run_seed, ExperimentConfig};

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/multirotor.toml");
    let config = ExperimentConfig::load(&path).expect("config");
    let EnvConfig::Multirotor(env_config) = &config.env else {
        unreachable!()
    };

    let mut env = MultirotorEnv::new(env_config.clone(), 0).expect("env");
    env.reset(0);
    let (mut track2, mut residual) = (0.0, 0.0);
    for t in 0..env_config.steps {
        let obs = env.next_observation().expect("step");
        let (reference, _) = env_config.reference((t + 1) as f64 * env_config.dt);
        let s = env.state();
        track2 += (s[X] - reference[0]).powi(2) + (s[Y] - reference[1]).powi(2);
        residual += ((obs.y[0] - obs.y_hat[0]).powi(2) + (obs.y[1] - obs.y_hat[1]).powi(2)).sqrt();
        if (t + 1) % 1000 == 0 {
            let health: Vec<String> = env.health().iter().map(|h| format!("{h:.3}")).collect();
            println!(
                "t={:>5} tracking rms {:.3} m  mean residual {:.2} mm  health [{}]",
                t + 1,
                (track2 / 1000.0).sqrt(),
                residual,
                health.join(" ")
            );
            track2 = 0.0;
            residual = 0.0;
        }
    }

    for seed in 0..3 {
        for run in run_seed(&config, seed).expect("run") {
            let s = &run.summary;
            println!(
                "seed {seed} {:<20} coverage {:.4}  volume {:.3e} m^2  local std {:.4}  vacuous {:.4}",
                run.method.label(),
                s.global_coverage,
                s.mean_volume_covered,
                s.local_std,
                s.vacuous_fraction
            );
        }
    }
}
