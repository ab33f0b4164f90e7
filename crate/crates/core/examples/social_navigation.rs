//! Crowd simulation with a growing collaboration radius, a constant-velocity
//! forecaster for the ego agent, and the conformal methods on its residuals.
//!
//! Run with `cargo run --release --example social_navigation`.

use std::path::PathBuf;

use adaptnc::envs::{EnvConfig, Environment, SocialNavEnv};
use adaptnc::experiment::{run_seed, ExperimentConfig};

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/socialnav.toml");
    let config = ExperimentConfig::load(&path).expect("config");
    let EnvConfig::Socialnav(env_config) = &config.env else {
        unreachable!()
    };

    let mut env = SocialNavEnv::new(env_config.clone(), 0).expect("env");
    env.reset(0);
    let mut error = 0.0;
    for t in 0..env_config.steps {
        let obs = env.next_observation().expect("step");
        error += ((obs.y[0] - obs.y_hat[0]).powi(2) + (obs.y[1] - obs.y_hat[1]).powi(2)).sqrt();
        if (t + 1) % 1000 == 0 {
            let crowd = env.crowd().expect("crowd");
            println!(
                "t={:>5} radius {:.2} m  agents {}  mean forecast error {:.3} m",
                t + 1,
                env.current_radius(),
                crowd.agents().len(),
                error / 1000.0
            );
            error = 0.0;
        }
    }

    for seed in 0..3 {
        for run in run_seed(&config, seed).expect("run") {
            let s = &run.summary;
            println!(
                "seed {seed} {:<20} coverage {:.4}  volume {:.4} m^2  local std {:.4}  vacuous {:.4}",
                run.method.label(),
                s.global_coverage,
                s.mean_volume_covered,
                s.local_std,
                s.vacuous_fraction
            );
        }
    }
}
