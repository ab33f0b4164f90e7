//! Cross-environment stream properties.

use adaptnc::envs::{EnvConfig, GmmConfig, LocalizationConfig, MultirotorConfig, SocialNavConfig};
use adaptnc::Point;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_envs() -> Vec<EnvConfig> {
    vec![
        EnvConfig::Gmm(GmmConfig::default()),
        EnvConfig::Localization(LocalizationConfig::default()),
        EnvConfig::Socialnav(SocialNavConfig::default()),
        EnvConfig::Multirotor(MultirotorConfig::default()),
    ]
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn mean_pairwise(a: &[Point], b: &[Point]) -> f64 {
    let total: f64 = a
        .iter()
        .map(|p| b.iter().map(|q| dist(*p, *q)).sum::<f64>())
        .sum();
    total / (a.len() * b.len()) as f64
}

fn energy_distance(a: &[Point], b: &[Point]) -> f64 {
    2.0 * mean_pairwise(a, b) - mean_pairwise(a, a) - mean_pairwise(b, b)
}

#[test]
fn every_environment_shifts() {
    const STRIDE: usize = 5;
    const PERMUTATIONS: usize = 199;
    for env in all_envs() {
        let stream = env.stream(500, 0).unwrap();
        let residuals: Vec<Point> = stream
            .eval
            .iter()
            .map(|o| [o.y[0] - o.y_hat[0], o.y[1] - o.y_hat[1]])
            .collect();
        let n = residuals.len();
        assert!(n >= 2000, "{}: {n} steps", env.name());
        let first: Vec<Point> = residuals[..1000].iter().step_by(STRIDE).copied().collect();
        let last: Vec<Point> = residuals[n - 1000..]
            .iter()
            .step_by(STRIDE)
            .copied()
            .collect();
        let observed = energy_distance(&first, &last);

        let mut pooled: Vec<Point> = first.iter().chain(&last).copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut null: Vec<f64> = (0..PERMUTATIONS)
            .map(|_| {
                pooled.shuffle(&mut rng);
                let (a, b) = pooled.split_at(first.len());
                energy_distance(a, b)
            })
            .collect();
        null.sort_by(f64::total_cmp);
        let p95 = null[(0.95 * PERMUTATIONS as f64) as usize];
        assert!(
            observed > 0.0 && observed > p95,
            "{}: observed {observed}, null p95 {p95}",
            env.name()
        );
    }
}

#[test]
fn every_environment_is_deterministic() {
    for env in all_envs() {
        let a = env.stream(100, 42).unwrap();
        let b = env.stream(100, 42).unwrap();
        assert_eq!(a.checksum(), b.checksum(), "{}", env.name());
        assert_eq!(a, b);
        let c = env.stream(100, 43).unwrap();
        assert_ne!(a.checksum(), c.checksum(), "{}", env.name());
    }
}
