//! Dynamically tuned adaptive conformal inference: a bank of ACI experts
//! with different step sizes, aggregated by exponential weights on the
//! pinball loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::RollingWindow;

/// Default step sizes: a doubling grid from 0.002 to 0.064.
pub const DEFAULT_GAMMAS: [f64; 6] = [0.002, 0.004, 0.008, 0.016, 0.032, 0.064];

/// `alpha (beta - theta) - min(0, beta - theta)`.
pub fn pinball_loss(beta: f64, theta: f64, alpha: f64) -> f64 {
    let d = beta - theta;
    alpha * d - d.min(0.0)
}

/// Learning rate for the expert weights over a horizon of `window` steps.
pub fn default_eta(k: usize, window: usize) -> f64 {
    let w = window as f64;
    (((2.0 * k as f64 * w).ln() + 1.0) / w).sqrt()
}

/// Mixing rate towards uniform weights over a horizon of `window` steps.
pub fn default_sigma(window: usize) -> f64 {
    1.0 / (2.0 * window as f64)
}

/// Checks step sizes: positive, strictly increasing, each at most twice the
/// previous one, and below 1.
pub fn validate_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::config("gammas", "need at least one expert"));
    }
    for (i, g) in gammas.iter().enumerate() {
        if !(*g > 0.0 && *g < 1.0) {
            return Err(Error::config(
                "gammas",
                format!("gamma {g} must lie in (0, 1)"),
            ));
        }
        if i > 0 {
            let prev = gammas[i - 1];
            if *g <= prev {
                return Err(Error::config("gammas", "must be strictly increasing"));
            }
            if *g > 2.0 * prev {
                return Err(Error::config(
                    "gammas",
                    format!("ratio {}/{} exceeds 2", g, prev),
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertBank {
    target_alpha: f64,
    gammas: Vec<f64>,
    alphas: Vec<f64>,
    /// Normalized to sum to 1.
    weights: Vec<f64>,
    eta: f64,
    sigma: f64,
}

impl ExpertBank {
    /// Fresh bank: every expert starts at the target level with equal weight.
    pub fn new(target_alpha: f64, gammas: &[f64], eta: f64, sigma: f64) -> Result<Self> {
        if !(target_alpha > 0.0 && target_alpha < 1.0) {
            return Err(Error::config(
                "target_alpha",
                format!("must lie in (0, 1), got {target_alpha}"),
            ));
        }
        validate_gammas(gammas)?;
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::config("eta", "must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&sigma) {
            return Err(Error::config("sigma", "must lie in [0, 1)"));
        }
        let k = gammas.len();
        Ok(ExpertBank {
            target_alpha,
            gammas: gammas.to_vec(),
            alphas: vec![target_alpha; k],
            weights: vec![1.0 / k as f64; k],
            eta,
            sigma,
        })
    }

    /// Same rates and target, reset to the initial state.
    pub fn fresh(&self) -> Self {
        let k = self.gammas.len();
        ExpertBank {
            alphas: vec![self.target_alpha; k],
            weights: vec![1.0 / k as f64; k],
            ..self.clone()
        }
    }

    /// Bank with explicit expert levels and (unnormalized) weights.
    pub fn with_state(mut self, alphas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let k = self.gammas.len();
        if alphas.len() != k || weights.len() != k {
            return Err(Error::invalid("state length differs from expert count"));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid(
                "weights must be nonnegative with positive sum",
            ));
        }
        self.alphas = alphas;
        self.weights = weights.iter().map(|w| w / total).collect();
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn target_alpha(&self) -> f64 {
        self.target_alpha
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Expert probabilities `p_i = w_i / sum_j w_j`.
    pub fn probabilities(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_i p_i alpha_i`.
    pub fn aggregate_alpha(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.alphas)
            .map(|(p, a)| p * a)
            .sum()
    }

    /// Error indicators `1{s > Q(1 - alpha_i)}` per expert and for the
    /// aggregate level.
    pub fn expert_errs(&self, window: &RollingWindow, s: f64) -> Result<(Vec<bool>, bool)> {
        let per = self
            .alphas
            .iter()
            .map(|a| window.quantile(1.0 - a).map(|q| s > q))
            .collect::<Result<Vec<_>>>()?;
        let agg = s > window.quantile(1.0 - self.aggregate_alpha())?;
        Ok((per, agg))
    }

    /// One step: exponential reweighting on the pinball loss, mixing towards
    /// uniform, then the ACI update of each expert level.
    ///
    /// `beta` is the largest miscoverage level whose region would still have
    /// covered the outcome.
    pub fn update(&mut self, beta: f64, errs: &[bool]) -> Result<()> {
        let k = self.gammas.len();
        if errs.len() != k {
            return Err(Error::invalid(format!(
                "expected {k} expert errors, got {}",
                errs.len()
            )));
        }
        let mut total = 0.0;
        for (w, a) in self.weights.iter_mut().zip(&self.alphas) {
            *w *= (-self.eta * pinball_loss(beta, *a, self.target_alpha)).exp();
            total += *w;
        }
        let mut sum = 0.0;
        for w in self.weights.iter_mut() {
            *w = (1.0 - self.sigma) * *w + total * self.sigma / k as f64;
            sum += *w;
        }
        for w in self.weights.iter_mut() {
            *w = (*w / sum).max(f64::MIN_POSITIVE);
        }
        let renorm: f64 = self.weights.iter().sum();
        for w in self.weights.iter_mut() {
            *w /= renorm;
        }
        for ((a, g), e) in self.alphas.iter_mut().zip(&self.gammas).zip(errs) {
            let err = if *e { 1.0 } else { 0.0 };
            *a += g * (self.target_alpha - err);
        }
        Ok(())
    }
}

/// Miscoverage form of the coverage rank: `1 - #{s_i <= s} / n`.
///
/// An outcome is covered at level `a` exactly when `a <= beta_miscoverage`,
/// so the pinball loss against expert levels is minimized by the level that
/// would have just covered it.
pub fn beta_miscoverage(window: &RollingWindow, s: f64) -> Result<f64> {
    Ok(1.0 - window.beta_of(s)?)
}

/// Step sizes and weight rates shared by every bank built during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtaciConfig {
    pub gammas: Vec<f64>,
    /// Defaults to [`default_eta`] for the run's window.
    pub eta: Option<f64>,
    /// Defaults to [`default_sigma`] for the run's window.
    pub sigma: Option<f64>,
}

impl Default for DtaciConfig {
    fn default() -> Self {
        DtaciConfig {
            gammas: DEFAULT_GAMMAS.to_vec(),
            eta: None,
            sigma: None,
        }
    }
}

impl DtaciConfig {
    pub fn bank(&self, target_alpha: f64, window: usize) -> Result<ExpertBank> {
        let eta = self
            .eta
            .unwrap_or_else(|| default_eta(self.gammas.len(), window));
        let sigma = self.sigma.unwrap_or_else(|| default_sigma(window));
        ExpertBank::new(target_alpha, &self.gammas, eta, sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball_loss(0.5, 0.5, 0.1), 0.0);
        assert!((pinball_loss(0.6, 0.5, 0.1) - 0.01).abs() < 1e-15);
        assert!((pinball_loss(0.4, 0.5, 0.1) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn aggregate_examples() {
        let single = ExpertBank::new(0.1, &[0.01], 0.0, 0.0)
            .unwrap()
            .with_state(vec![0.37], vec![1.0])
            .unwrap();
        assert_eq!(single.aggregate_alpha(), 0.37);

        let pair = ExpertBank::new(0.1, &[0.01, 0.02], 0.0, 0.0)
            .unwrap()
            .with_state(vec![0.05, 0.15], vec![1.0, 1.0])
            .unwrap();
        assert!((pair.aggregate_alpha() - 0.10).abs() < 1e-15);

        let dominated = ExpertBank::new(0.1, &[0.01, 0.02, 0.03], 0.0, 0.0)
            .unwrap()
            .with_state(vec![0.2, 0.9, -3.0], vec![1.0, 1e-300, 1e-300])
            .unwrap();
        assert!((dominated.aggregate_alpha() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_rates_only_move_levels() {
        let mut bank = ExpertBank::new(0.1, &[0.01, 0.02], 0.0, 0.0)
            .unwrap()
            .with_state(vec![0.1, 0.1], vec![0.3, 0.7])
            .unwrap();
        bank.update(0.42, &[true, false]).unwrap();
        assert!((bank.probabilities()[0] - 0.3).abs() < 1e-15);
        assert!((bank.probabilities()[1] - 0.7).abs() < 1e-15);
        assert!((bank.alphas()[0] - (0.1 + 0.01 * (0.1 - 1.0))).abs() < 1e-15);
        assert!((bank.alphas()[1] - (0.1 + 0.02 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn single_expert_miss() {
        let mut bank = ExpertBank::new(0.1, &[0.05], 1.0, 0.0).unwrap();
        bank.update(0.3, &[true]).unwrap();
        assert!((bank.alphas()[0] - 0.055).abs() < 1e-15);
    }

    #[test]
    fn weight_ratio_follows_losses() {
        // gammas only need to be valid here; levels are set explicitly
        let mut bank = ExpertBank::new(0.1, &[0.01, 0.02], 1.0, 0.0)
            .unwrap()
            .with_state(vec![0.5, 0.9], vec![1.0, 1.0])
            .unwrap();
        bank.update(0.5, &[false, false]).unwrap();
        let p = bank.probabilities();
        let expected = (-pinball_loss(0.5, 0.5, 0.1)).exp() / (-pinball_loss(0.5, 0.9, 0.1)).exp();
        assert!((p[0] / p[1] - expected).abs() < 1e-12);
        assert!((expected - pinball_loss(0.5, 0.9, 0.1).exp()).abs() < 1e-15);
    }

    #[test]
    fn expert_errs_examples() {
        let scores: Vec<f64> = (1..=10).map(f64::from).collect();
        let window = RollingWindow::from_scores(10, &scores, 0).unwrap();
        let bank = ExpertBank::new(0.1, &[0.01, 0.02, 0.04], 0.0, 0.0)
            .unwrap()
            .with_state(vec![0.0, 1.0, 0.1], vec![1.0, 1.0, 1.0])
            .unwrap();
        let (per, _) = bank.expert_errs(&window, 1e9).unwrap();
        // level 1 - 0 = 1 gives an infinite threshold, 1 - 1 = 0 an empty one
        assert!(!per[0]);
        assert!(per[1]);
        let (per, _) = bank.expert_errs(&window, -1e9).unwrap();
        assert!(per[1]);
        // ceil(0.9 * 10) = 9th order statistic is 9, so 9.5 is not covered
        let sorted = window.sorted();
        let oracle = sorted[(0.9f64 * 10.0).ceil() as usize - 1];
        assert_eq!(oracle, 9.0);
        let (per, _) = bank.expert_errs(&window, 9.5).unwrap();
        assert_eq!(per[2], 9.5 > oracle);
        let (per, _) = bank.expert_errs(&window, 9.0).unwrap();
        assert!(!per[2]);
    }

    #[test]
    fn gamma_validation() {
        assert!(validate_gammas(&DEFAULT_GAMMAS).is_ok());
        assert!(validate_gammas(&[0.01, 0.03]).is_err());
        assert!(validate_gammas(&[0.02, 0.01]).is_err());
        assert!(validate_gammas(&[0.0, 0.01]).is_err());
        assert!(validate_gammas(&[]).is_err());
        assert!(matches!(
            ExpertBank::new(1.5, &[0.01], 0.1, 0.0),
            Err(Error::Config { key, .. }) if key == "target_alpha"
        ));
    }

    #[test]
    fn fresh_resets_state() {
        let mut bank = DtaciConfig::default().bank(0.1, 500).unwrap();
        let initial = bank.clone();
        for _ in 0..10 {
            bank.update(0.0, &[true; 6]).unwrap();
        }
        assert_ne!(bank, initial);
        assert_eq!(bank.fresh(), initial);
    }

    #[test]
    fn default_rates() {
        let eta = default_eta(6, 500);
        assert!((eta - ((6000f64).ln() + 1.0).sqrt() / 500f64.sqrt()).abs() < 1e-15);
        assert_eq!(default_sigma(500), 0.001);
    }

    proptest! {
        #[test]
        fn weights_stay_normalized(
            steps in prop::collection::vec((0.0f64..1.0, prop::collection::vec(any::<bool>(), 6)), 1..200),
            eta in 0.0f64..20.0,
            sigma in 0.0f64..0.5,
        ) {
            let mut bank = ExpertBank::new(0.1, &DEFAULT_GAMMAS, eta, sigma).unwrap();
            for (beta, errs) in steps {
                bank.update(beta, &errs).unwrap();
                let sum: f64 = bank.probabilities().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(bank.probabilities().iter().all(|p| *p > 0.0));
            }
        }

        #[test]
        fn single_expert_is_aci(
            steps in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..200),
            gamma in 0.001f64..0.5,
        ) {
            let mut bank = ExpertBank::new(0.1, &[gamma], 1.0, 0.01).unwrap();
            let mut alpha = 0.1;
            for (beta, err) in steps {
                bank.update(beta, &[err]).unwrap();
                alpha += gamma * (0.1 - if err { 1.0 } else { 0.0 });
                prop_assert_eq!(bank.alphas()[0], alpha);
                prop_assert_eq!(bank.aggregate_alpha(), alpha);
            }
        }
    }
}
