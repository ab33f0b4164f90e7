//! Two-component Gaussian stream whose mixture weight ramps from one
//! component to the other: the ideal miscoverage level of each fixed score
//! and the local coverage of every method.
//!
//! Run with `cargo run --release --example gmm_shift`.

use std::path::PathBuf;

use adaptnc::envs::gmm::{gmm_alpha_star, CdfMode};
use adaptnc::envs::EnvConfig;
use adaptnc::experiment::{run_on_stream, ExperimentConfig};
use adaptnc::metrics::local_coverage;

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/gmm.toml");
    let config = ExperimentConfig::load(&path).expect("config");
    let EnvConfig::Gmm(gmm) = &config.env else {
        unreachable!()
    };
    let (n1, n2) = gmm.components().expect("components");
    let seed = 0;
    let stream = config
        .env
        .stream(config.adaptnc.calibration, seed)
        .expect("stream");

    // alpha*_j: miscoverage level that the empirical CDF of score j must be
    // queried at to hit the true 90% quantile of the current mixture.
    let samples: Vec<_> = stream.eval.iter().map(|o| o.y).collect();
    let weights: Vec<f64> = (0..samples.len()).map(|t| gmm.weight(t as i64)).collect();
    let trace = gmm_alpha_star(
        &samples,
        &weights,
        (&n1, &n2),
        (&n1, &n2),
        0.1,
        CdfMode::Cumulative,
        20_000,
        seed,
    )
    .expect("alpha star");
    println!(
        "{:>6} {:>6} {:>9} {:>9} {:>9}",
        "t", "w", "alpha*_1", "alpha*_2", "diff"
    );
    for t in (500..samples.len()).step_by(500) {
        println!(
            "{t:>6} {:>6.2} {:>9.3} {:>9.3} {:>+9.3}",
            weights[t],
            trace.alpha1[t],
            trace.alpha2[t],
            trace.alpha1[t] - trace.alpha2[t]
        );
    }

    let w = config.local_window;
    for run in run_on_stream(&config, &stream, seed).expect("runs") {
        let lc = local_coverage(&run.output.records, w).expect("local coverage");
        let min = lc[w..].iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "{:<20} coverage {:.4}  volume {:.2}  lowest local coverage {:.3}  refits {}",
            run.method.label(),
            run.summary.global_coverage,
            run.summary.mean_volume_covered,
            min,
            run.output.adaptations.len()
        );
    }
}
