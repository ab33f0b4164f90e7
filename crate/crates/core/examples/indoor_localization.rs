//! RSSI-based indoor localization with a model-based predictor that ignores
//! shadowing and fading, followed by the four conformal methods on the
//! resulting residual stream.
//!
//! Run with `cargo run --release --example indoor_localization`.

use std::path::PathBuf;

use adaptnc::envs::{EnvConfig, Environment, LocalizationEnv};
use adaptnc::experiment::{run_seed, ExperimentConfig};

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/localization.toml");
    let config = ExperimentConfig::load(&path).expect("config");
    let EnvConfig::Localization(env_config) = &config.env else {
        unreachable!()
    };

    let mut env = LocalizationEnv::new(env_config.clone(), 0).expect("env");
    env.reset(0);
    for t in 0..env_config.steps {
        let obs = env.next_observation().expect("step");
        if t % 1000 == 0 {
            let rssi: Vec<String> = env.rssi().iter().map(|r| format!("{r:.1}")).collect();
            println!(
                "t={t:>5} truth [{:+.2}, {:+.2}] estimate [{:+.2}, {:+.2}] rssi [{}] dBm",
                obs.y[0],
                obs.y[1],
                obs.y_hat[0],
                obs.y_hat[1],
                rssi.join(", ")
            );
        }
    }

    for seed in 0..3 {
        for run in run_seed(&config, seed).expect("run") {
            let s = &run.summary;
            println!(
                "seed {seed} {:<20} coverage {:.4}  volume {:>7.2} m^2  local std {:.4}  vacuous {:.4}",
                run.method.label(),
                s.global_coverage,
                s.mean_volume_covered,
                s.local_std,
                s.vacuous_fraction
            );
        }
    }
}
