//! Interchangeable runners: split conformal prediction, DtACI on a fixed
//! score, and the adaptive loop with and without replay.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adaptnc::{self, AdaptncConfig, RunOutput, StepRecord};
use crate::error::{Error, Result};
use crate::score::{Observation, PolytopeScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SplitCp,
    #[serde(rename = "dtaci", alias = "dtaci_fixed")]
    DtaciFixed,
    AdaptncNoReplay,
    Adaptnc,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::SplitCp,
        Method::DtaciFixed,
        Method::AdaptncNoReplay,
        Method::Adaptnc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SplitCp => "split_cp",
            Method::DtaciFixed => "dtaci",
            Method::AdaptncNoReplay => "adaptnc_no_replay",
            Method::Adaptnc => "adaptnc",
        }
    }

    /// Row label used in summary tables.
    pub fn label(&self) -> &'static str {
        match self {
            Method::SplitCp => "Split CP",
            Method::DtaciFixed => "DtACI",
            Method::AdaptncNoReplay => "AdaptNC w/o Replay",
            Method::Adaptnc => "AdaptNC",
        }
    }

    /// The adaptive-loop configuration this method runs with.
    pub fn adaptnc_config(&self, base: &AdaptncConfig) -> AdaptncConfig {
        let mut cfg = base.clone();
        match self {
            Method::SplitCp | Method::DtaciFixed => cfg.adapt_interval = None,
            Method::AdaptncNoReplay => cfg.replay = false,
            Method::Adaptnc => cfg.replay = true,
        }
        cfg
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split_cp" | "split" => Ok(Method::SplitCp),
            "dtaci" | "dtaci_fixed" => Ok(Method::DtaciFixed),
            "adaptnc_no_replay" | "no_replay" => Ok(Method::AdaptncNoReplay),
            "adaptnc" => Ok(Method::Adaptnc),
            other => Err(Error::config("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Index `ceil((n + 1)(1 - alpha))` of the split-conformal order statistic.
pub fn split_cp_index(n: usize, alpha: f64) -> Result<usize> {
    let k = (((n + 1) as f64) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize;
    if k > n {
        return Err(Error::InsufficientCalibration {
            needed: k,
            available: n,
        });
    }
    Ok(k)
}

/// Split conformal threshold: the `ceil((n + 1)(1 - alpha))`-th smallest
/// calibration score.
pub fn split_cp_threshold(scores: &[f64], alpha: f64) -> Result<f64> {
    let k = split_cp_index(scores.len(), alpha)?;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[k - 1])
}

/// Split CP with the score fitted to the calibration prefix and a threshold
/// frozen after calibration.
pub fn split_cp_run<I>(
    calibration: &[Observation],
    theta: &PolytopeScore,
    stream: I,
    alpha: f64,
) -> Result<Vec<StepRecord>>
where
    I: IntoIterator<Item = Observation>,
{
    let scores: Vec<f64> = calibration
        .iter()
        .map(|o| theta.eval(o.y_hat, o.y))
        .collect();
    let q = split_cp_threshold(&scores, alpha)?;
    let volume = theta.region_volume(q)?;
    Ok(stream
        .into_iter()
        .enumerate()
        .map(|(t, obs)| {
            let s = theta.eval(obs.y_hat, obs.y);
            StepRecord {
                t,
                alpha_bar: alpha,
                q,
                score: s,
                covered: s <= q,
                volume,
                vacuous: false,
                weights: Vec::new(),
                theta_version: 0,
            }
        })
        .collect())
}

/// Runs `method` on a calibration prefix and evaluation stream. Every
/// method shares the initial score fitted to the calibration prefix.
pub fn run_method<I>(
    method: Method,
    calibration: &[Observation],
    stream: I,
    config: &AdaptncConfig,
    seed: u64,
) -> Result<RunOutput>
where
    I: IntoIterator<Item = Observation>,
{
    let cfg = method.adaptnc_config(config);
    cfg.validate()?;
    let theta0 = adaptnc::fit_initial_score(calibration, &cfg, seed)?;
    match method {
        Method::SplitCp => Ok(RunOutput {
            records: split_cp_run(calibration, &theta0, stream, cfg.target_alpha)?,
            adaptations: Vec::new(),
            theta0,
        }),
        _ => adaptnc::run_from(calibration, theta0, stream, &cfg, seed),
    }
}
