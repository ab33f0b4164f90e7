//! A bank of adaptive conformal experts tracking a scalar score stream whose
//! spread doubles halfway through.
//!
//! Run with `cargo run --release --example dtaci_bank`.

use adaptnc::dtaci::{beta_miscoverage, DtaciConfig};
use adaptnc::RollingWindow;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let alpha = 0.1;
    let window_len = 500;
    let config = DtaciConfig::default();
    let mut bank = config.bank(alpha, window_len).expect("bank");
    println!(
        "rates {:?}, eta {:.4}, sigma {:.4}",
        bank.gammas(),
        bank.eta(),
        bank.sigma()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut window = RollingWindow::new(window_len).expect("window");
    for _ in 0..window_len {
        let s: f64 = StandardNormal.sample(&mut rng);
        window.push(s.abs());
    }

    let (mut misses, mut count) = (0, 0);
    for t in 0..8000 {
        let spread = if t < 4000 { 1.0 } else { 2.0 };
        let z: f64 = StandardNormal.sample(&mut rng);
        let s = spread * z.abs();
        let alpha_bar = bank.aggregate_alpha();
        let q = window.quantile(1.0 - alpha_bar).expect("quantile");
        misses += usize::from(s > q);
        count += 1;
        let beta = beta_miscoverage(&window, s).expect("beta");
        let (errs, _) = bank.expert_errs(&window, s).expect("errs");
        bank.update(beta, &errs).expect("update");
        window.push(s);
        if (t + 1) % 1000 == 0 {
            let probs: Vec<String> = bank
                .probabilities()
                .iter()
                .map(|p| format!("{p:.2}"))
                .collect();
            println!(
                "t={:>4}  miscoverage {:.3}  alpha_bar {:+.3}  q {:.2}  weights [{}]",
                t + 1,
                misses as f64 / count as f64,
                alpha_bar,
                q,
                probs.join(" ")
            );
            misses = 0;
            count = 0;
        }
    }
}
