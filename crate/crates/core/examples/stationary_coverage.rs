//! All four methods on an i.i.d. Gaussian residual stream.
//!
//! Run with `cargo run --release --example stationary_coverage`.

use std::time::Instant;

use adaptnc::baselines::run_method;
use adaptnc::{AdaptncConfig, Method, Observation, RunSummary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_stream(n: usize, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|t| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Observation {
                t,
                x: Vec::new(),
                y: [a, 0.5 * b + 0.3 * a],
                y_hat: [0.0, 0.0],
            }
        })
        .collect()
}

fn main() {
    let config = AdaptncConfig::default();
    let all = gaussian_stream(config.calibration + 20_000, 1);
    let (cal, eval) = all.split_at(config.calibration);
    for method in Method::ALL {
        let start = Instant::now();
        let out = run_method(method, cal, eval.iter().cloned(), &config, 1).expect("run");
        let summary = RunSummary::from_records(&out.records, 100).expect("summary");
        println!(
            "{:<20} coverage {:.4}  volume {:.3}  local std {:.4}  refits {:>3}  {:.1?}",
            method.label(),
            summary.global_coverage,
            summary.mean_volume_covered,
            summary.local_std,
            out.adaptations.len(),
            start.elapsed()
        );
    }
}
