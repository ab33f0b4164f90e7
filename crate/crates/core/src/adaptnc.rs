//! The online loop: threshold tracking with an expert bank, periodic refits
//! of the polytope score to recency-weighted residuals, and counterfactual
//! replay of recent steps under the refitted score.

use std::collections::VecDeque;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::density::{mckde_hdr, weighted_covariance, MckdeConfig};
use crate::dtaci::{beta_miscoverage, DtaciConfig, ExpertBank};
use crate::error::{Error, Result};
use crate::geometry::{hull_to_polytope, quickhull, Point};
use crate::score::{Observation, PolytopeScore, RollingWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptncConfig {
    pub target_alpha: f64,
    /// Steps between score refits; `None` keeps the initial score forever.
    pub adapt_interval: Option<usize>,
    /// Rolling score window length.
    pub window: usize,
    pub dtaci: DtaciConfig,
    pub mckde: MckdeConfig,
    pub replay: bool,
    /// Length of the calibration prefix used to fit the initial score.
    pub calibration: usize,
    /// Oldest history entries are dropped beyond this many.
    pub history_cap: Option<usize>,
    /// Refits are skipped until the history holds this many entries.
    pub min_history: usize,
    /// History entries whose combined recency weight (oldest first) falls
    /// below this fraction are left out of the refit.
    pub history_tail_mass: f64,
}

impl Default for AdaptncConfig {
    fn default() -> Self {
        AdaptncConfig {
            target_alpha: 0.1,
            adapt_interval: Some(100),
            window: 500,
            dtaci: DtaciConfig::default(),
            mckde: MckdeConfig::default(),
            replay: true,
            calibration: 500,
            history_cap: None,
            min_history: 20,
            history_tail_mass: 1e-3,
        }
    }
}

impl AdaptncConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_alpha > 0.0 && self.target_alpha < 1.0) {
            return Err(Error::config(
                "target_alpha",
                format!("must lie in (0, 1), got {}", self.target_alpha),
            ));
        }
        if self.adapt_interval == Some(0) {
            return Err(Error::config("adapt_interval", "must be at least 1"));
        }
        if self.window < 10 {
            return Err(Error::config("window", "must be at least 10"));
        }
        if self.calibration < 2 {
            return Err(Error::config("calibration", "must be at least 2"));
        }
        if self.min_history < 3 {
            return Err(Error::config("min_history", "must be at least 3"));
        }
        if let Some(cap) = self.history_cap {
            if cap < self.min_history {
                return Err(Error::config("history_cap", "must be at least min_history"));
            }
        }
        if !(0.0..0.5).contains(&self.history_tail_mass) {
            return Err(Error::config("history_tail_mass", "must lie in [0, 0.5)"));
        }
        self.mckde.validate()?;
        self.dtaci.bank(self.target_alpha, self.window)?;
        Ok(())
    }
}

/// Output of one evaluation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub alpha_bar: f64,
    pub q: f64,
    pub score: f64,
    pub covered: bool,
    pub volume: f64,
    pub vacuous: bool,
    /// Expert probabilities used for this step (empty for split CP).
    pub weights: Vec<f64>,
    pub theta_version: u64,
}

/// A score refit attempted after step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub t: usize,
    /// `None` when the refit fell back to the previous score.
    pub theta: Option<PolytopeScore>,
    pub theta_version: u64,
    /// History entries that entered the refit.
    pub history_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub adaptations: Vec<Adaptation>,
    pub theta0: PolytopeScore,
}

/// Normalized recency weights `sum_i p_i (1 - gamma_i)^(now - t + 1)` for
/// entries stamped `timestamps` (all `<= now`).
pub fn history_weights(
    probabilities: &[f64],
    gammas: &[f64],
    now: usize,
    timestamps: &[usize],
) -> Result<Vec<f64>> {
    if probabilities.len() != gammas.len() {
        return Err(Error::invalid("probabilities and gammas differ in length"));
    }
    if gammas.iter().any(|g| !(*g >= 0.0 && *g < 1.0)) {
        return Err(Error::invalid("history weights need every gamma in [0, 1)"));
    }
    let logs: Vec<f64> = gammas.iter().map(|g| (-g).ln_1p()).collect();
    let mut out: Vec<f64> = timestamps
        .iter()
        .map(|&t| {
            let age = (now + 1).saturating_sub(t) as f64;
            probabilities
                .iter()
                .zip(&logs)
                .map(|(p, l)| p * (age * l).exp())
                .sum()
        })
        .collect();
    let total: f64 = out.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("history weights underflow to zero"));
    }
    for w in out.iter_mut() {
        *w /= total;
    }
    Ok(out)
}

/// Fits a polytope score to weighted residuals: high-density samples of the
/// weighted KDE, then their convex hull.
///
/// Returns `DegenerateInput` when the residuals span less than two
/// dimensions.
pub fn optimize_score(
    residuals: &[Point],
    weights: &[f64],
    alpha: f64,
    mckde: &MckdeConfig,
    seed: u64,
) -> Result<PolytopeScore> {
    if residuals.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "{} residuals cannot span a polygon",
            residuals.len()
        )));
    }
    let c = weighted_covariance(residuals, weights);
    let trace = c[0] + c[2];
    let det = c[0] * c[2] - c[1] * c[1];
    if !(trace > 0.0) || det <= 1e-12 * trace * trace {
        return Err(Error::DegenerateInput(
            "residuals are identical or collinear".into(),
        ));
    }
    let hdr = mckde_hdr(residuals, weights, alpha, mckde, seed)?;
    let hull = quickhull(&hdr.points)?;
    Ok(hull_to_polytope(&hull))
}

/// Window plus bank: the threshold-tracking state.
#[derive(Debug, Clone)]
struct Tracker {
    bank: ExpertBank,
    window: RollingWindow,
}

struct StepOutcome {
    alpha_bar: f64,
    q: f64,
    covered: bool,
}

impl Tracker {
    /// Threshold and coverage from the scores seen so far, then the expert
    /// update and the window append.
    fn step(&mut self, s: f64) -> Result<StepOutcome> {
        let alpha_bar = self.bank.aggregate_alpha();
        let q = self.window.quantile(1.0 - alpha_bar)?;
        let beta = beta_miscoverage(&self.window, s)?;
        let (errs, _) = self.bank.expert_errs(&self.window, s)?;
        self.bank.update(beta, &errs)?;
        self.window.push(s);
        Ok(StepOutcome {
            alpha_bar,
            q,
            covered: s <= q,
        })
    }
}

/// Counterfactual re-run of the expert bank over recent scores.
///
/// The last `min(capacity, n - 1)` scores are replayed in order from `bank`,
/// each against a window of the scores before it. The returned window holds
/// the last `capacity` scores.
pub fn replay(
    scores: &[f64],
    capacity: usize,
    bank: ExpertBank,
    theta_version: u64,
) -> Result<(ExpertBank, RollingWindow)> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let replayed = capacity.min(n - 1);
    let start = n - replayed;
    let seed = &scores[start.saturating_sub(capacity)..start];
    let mut tracker = Tracker {
        bank,
        window: RollingWindow::from_scores(capacity, seed, theta_version)?,
    };
    for &s in &scores[start..] {
        tracker.step(s)?;
    }
    Ok((tracker.bank, tracker.window))
}

fn mix_seed(seed: u64, counter: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fits the initial score to calibration residuals with uniform weights.
pub fn fit_initial_score(
    calibration: &[Observation],
    config: &AdaptncConfig,
    seed: u64,
) -> Result<PolytopeScore> {
    let residuals: Vec<Point> = calibration.iter().map(Observation::residual).collect();
    let weights = vec![1.0; residuals.len()];
    optimize_score(
        &residuals,
        &weights,
        config.target_alpha,
        &config.mckde,
        mix_seed(seed, 0),
    )
}

struct History {
    stamps: VecDeque<usize>,
    residuals: VecDeque<Point>,
    cap: Option<usize>,
}

impl History {
    fn push(&mut self, t: usize, r: Point) {
        self.stamps.push_back(t);
        self.residuals.push_back(r);
        if let Some(cap) = self.cap {
            while self.stamps.len() > cap {
                self.stamps.pop_front();
                self.residuals.pop_front();
            }
        }
    }

    fn len(&self) -> usize {
        self.stamps.len()
    }

    fn recent_scores(&self, theta: &PolytopeScore, count: usize) -> Vec<f64> {
        let skip = self.len().saturating_sub(count);
        self.residuals
            .iter()
            .skip(skip)
            .map(|r| theta.eval_residual(*r))
            .collect()
    }
}

/// Runs the online loop over `stream` after fitting on `calibration`.
///
/// With `adapt_interval = None` the score never changes and the loop is
/// plain DtACI on a fixed score.
pub fn run<I>(
    calibration: &[Observation],
    stream: I,
    config: &AdaptncConfig,
    seed: u64,
) -> Result<RunOutput>
where
    I: IntoIterator<Item = Observation>,
{
    config.validate()?;
    if calibration.len() < 3 {
        return Err(Error::InsufficientCalibration {
            needed: 3,
            available: calibration.len(),
        });
    }
    let theta0 = fit_initial_score(calibration, config, seed)?;
    run_from(calibration, theta0, stream, config, seed)
}

/// As [`run`], with the initial score supplied by the caller.
pub fn run_from<I>(
    calibration: &[Observation],
    theta0: PolytopeScore,
    stream: I,
    config: &AdaptncConfig,
    seed: u64,
) -> Result<RunOutput>
where
    I: IntoIterator<Item = Observation>,
{
    config.validate()?;
    if calibration.is_empty() {
        return Err(Error::InsufficientCalibration {
            needed: 1,
            available: 0,
        });
    }
    let w = config.window;
    let mut history = History {
        stamps: VecDeque::new(),
        residuals: VecDeque::new(),
        cap: config.history_cap,
    };
    for (i, obs) in calibration.iter().enumerate() {
        history.push(i, obs.residual());
    }
    let offset = calibration.len();

    let mut theta = theta0.clone();
    let mut version = 0u64;
    let cal_scores = history.recent_scores(&theta, w);
    let mut tracker = Tracker {
        bank: config.dtaci.bank(config.target_alpha, w)?,
        window: RollingWindow::from_scores(w, &cal_scores, version)?,
    };

    let mut records = Vec::new();
    let mut adaptations = Vec::new();
    let mut refits = 0u64;

    for (t, obs) in stream.into_iter().enumerate() {
        debug_assert_eq!(tracker.window.theta_version(), version);
        let s = theta.eval(obs.y_hat, obs.y);
        let weights = tracker.bank.probabilities().to_vec();
        let out = tracker.step(s)?;
        let vacuous = out.q == f64::INFINITY;
        let volume = theta.region_volume(out.q)?;
        records.push(StepRecord {
            t,
            alpha_bar: out.alpha_bar,
            q: out.q,
            score: s,
            covered: out.covered,
            volume,
            vacuous,
            weights,
            theta_version: version,
        });
        let now = offset + t;
        history.push(now, obs.residual());

        let due = matches!(config.adapt_interval, Some(ts) if (t + 1) % ts == 0);
        if !due || history.len() < config.min_history {
            continue;
        }
        refits += 1;
        let stamps: Vec<usize> = history.stamps.iter().copied().collect();
        let omega = history_weights(
            tracker.bank.probabilities(),
            tracker.bank.gammas(),
            now,
            &stamps,
        )?;
        let first = tail_cut(&omega, config.history_tail_mass, config.min_history);
        let residuals: Vec<Point> = history.residuals.iter().skip(first).copied().collect();
        let fitted = optimize_score(
            &residuals,
            &omega[first..],
            config.target_alpha,
            &config.mckde,
            mix_seed(seed, refits),
        );
        let new_theta = match fitted {
            Ok(th) => th,
            Err(Error::DegenerateInput(msg)) => {
                warn!("score refit at t={t} skipped, keeping previous score: {msg}");
                adaptations.push(Adaptation {
                    t,
                    theta: None,
                    theta_version: version,
                    history_used: residuals.len(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        theta = new_theta;
        version += 1;
        debug!(
            "refit at t={t}: {} facets from {} residuals",
            theta.len(),
            residuals.len()
        );
        let rescored = history.recent_scores(&theta, 2 * w);
        tracker = if config.replay {
            let (bank, window) = replay(&rescored, w, tracker.bank.fresh(), version)?;
            Tracker { bank, window }
        } else {
            let mut window = tracker.window;
            window.rescore(&rescored, version);
            Tracker {
                bank: tracker.bank.fresh(),
                window,
            }
        };
        adaptations.push(Adaptation {
            t,
            theta: Some(theta.clone()),
            theta_version: version,
            history_used: residuals.len(),
        });
    }

    Ok(RunOutput {
        records,
        adaptations,
        theta0,
    })
}

/// Index of the first entry to keep so that the dropped oldest entries carry
/// at most `tail` of the total weight, keeping at least `min_keep` entries.
fn tail_cut(weights: &[f64], tail: f64, min_keep: usize) -> usize {
    let mut acc = 0.0;
    let mut first = 0;
    for (i, w) in weights.iter().enumerate() {
        if acc + w > tail {
            break;
        }
        acc += w;
        first = i + 1;
    }
    first.min(weights.len().saturating_sub(min_keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_weight_examples() {
        let uniform = history_weights(&[1.0], &[0.0], 10, &[3, 5, 9]).unwrap();
        for w in &uniform {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let halves = history_weights(&[1.0], &[0.5], 10, &[9, 10]).unwrap();
        assert!((halves[1] / halves[0] - 2.0).abs() < 1e-12);

        let stamps = [1, 4, 6, 8];
        let dominant = history_weights(&[1.0, 0.0], &[0.1, 0.2], 8, &stamps).unwrap();
        let single = history_weights(&[1.0], &[0.1], 8, &stamps).unwrap();
        for (a, b) in dominant.iter().zip(&single) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(history_weights(&[1.0], &[1.0], 8, &stamps).is_err());
    }

    #[test]
    fn history_weights_decrease_with_age() {
        let stamps: Vec<usize> = (0..50).collect();
        let w = history_weights(&[0.2, 0.8], &[0.01, 0.3], 49, &stamps).unwrap();
        assert!(w.windows(2).all(|p| p[0] < p[1]));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_cut_keeps_mass_and_minimum() {
        let w = [0.0005, 0.0004, 0.1, 0.3, 0.5991];
        assert_eq!(tail_cut(&w, 1e-3, 2), 2);
        assert_eq!(tail_cut(&w, 0.0, 2), 0);
        assert_eq!(tail_cut(&w, 0.45, 4), 1);
    }

    #[test]
    fn identical_residuals_are_degenerate() {
        let r = vec![[0.5, 0.5]; 40];
        let w = vec![1.0; 40];
        assert!(matches!(
            optimize_score(&r, &w, 0.1, &MckdeConfig::default(), 0),
            Err(Error::DegenerateInput(_))
        ));
        let line: Vec<Point> = (0..40).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(
            optimize_score(&line, &w, 0.1, &MckdeConfig::default(), 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn replay_of_single_step_is_one_update() {
        let bank = DtaciConfig::default().bank(0.1, 10).unwrap();
        let (after, window) = replay(&[0.3, 0.7], 1, bank.clone(), 4).unwrap();
        let mut expected = bank;
        let seed = RollingWindow::from_scores(1, &[0.3], 4).unwrap();
        let beta = beta_miscoverage(&seed, 0.7).unwrap();
        let (errs, _) = expected.expert_errs(&seed, 0.7).unwrap();
        expected.update(beta, &errs).unwrap();
        assert_eq!(after, expected);
        assert_eq!(window.scores().collect::<Vec<_>>(), vec![0.7]);
        assert_eq!(window.theta_version(), 4);
    }
}
