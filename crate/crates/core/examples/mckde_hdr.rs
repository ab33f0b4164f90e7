//! High-density region of a weighted sample via Monte-Carlo KDE, and the
//! convex hull fitted to it.
//!
//! Run with `cargo run --release --example mckde_hdr`.

use std::time::Instant;

use adaptnc::density::{mckde_hdr, MckdeConfig};
use adaptnc::quickhull;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    // 90% highest-density region of a standard bivariate normal: a disk of
    // squared radius chi2_{2, 0.9} = -2 ln 0.1.
    let analytic = std::f64::consts::PI * -2.0 * 0.1f64.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n, m) in [(500, 2000), (2000, 8000), (5000, 20000)] {
        let points: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                [
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ]
            })
            .collect();
        let weights = vec![1.0; n];
        let config = MckdeConfig {
            samples: m,
            ..Default::default()
        };
        let start = Instant::now();
        let hdr = mckde_hdr(&points, &weights, 0.1, &config, 9).expect("hdr");
        let hull = quickhull(&hdr.points).expect("hull");
        println!(
            "N={n:>5} M={m:>5}  kept {:>5}  hull area {:.3} (analytic {:.3})  {} vertices  {:.1?}",
            hdr.points.len(),
            hull.area(),
            analytic,
            hull.len(),
            start.elapsed()
        );
    }
}
