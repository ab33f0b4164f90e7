//! Coverage, volume and vacuity statistics over step records.

use serde::{Deserialize, Serialize};

use crate::adaptnc::StepRecord;
use crate::error::{Error, Result};

/// Local coverage window used in summaries.
pub const DEFAULT_LOCAL_WINDOW: usize = 100;

/// Fraction of covered steps.
pub fn global_coverage(records: &[StepRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyRun);
    }
    let covered = records.iter().filter(|r| r.covered).count();
    Ok(covered as f64 / records.len() as f64)
}

/// Centered moving average of coverage over indices `t - w/2 + 1 ..= t + w/2`,
/// truncated at the ends of the run.
pub fn local_coverage(records: &[StepRecord], w: usize) -> Result<Vec<f64>> {
    let flags: Vec<bool> = records.iter().map(|r| r.covered).collect();
    local_coverage_flags(&flags, w)
}

/// [`local_coverage`] over raw coverage indicators.
pub fn local_coverage_flags(covered: &[bool], w: usize) -> Result<Vec<f64>> {
    let n = covered.len();
    if n == 0 {
        return Err(Error::EmptyRun);
    }
    if w == 0 || w > n {
        return Err(Error::WindowTooLarge { window: w, len: n });
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for c in covered {
        prefix.push(prefix.last().unwrap() + usize::from(*c));
    }
    let back = (w / 2).saturating_sub(1);
    let ahead = w / 2;
    Ok((0..n)
        .map(|t| {
            let lo = t.saturating_sub(back);
            let hi = (t + ahead).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) as f64 / (hi + 1 - lo) as f64
        })
        .collect())
}

/// Mean volume over covered, non-vacuous steps (NaN if there are none) and
/// the fraction of vacuous steps.
pub fn volume_stats(records: &[StepRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyRun);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut vacuous = 0usize;
    for r in records {
        if r.vacuous {
            vacuous += 1;
        } else if r.covered {
            sum += r.volume;
            count += 1;
        }
    }
    let mean = if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    };
    Ok((mean, vacuous as f64 / records.len() as f64))
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub global_coverage: f64,
    pub mean_volume_covered: f64,
    pub local_window: usize,
    pub local_mean: f64,
    pub local_std: f64,
    pub vacuous_fraction: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub local_coverage_series: Vec<f64>,
}

impl RunSummary {
    /// Summary with local coverage over a window of `w` steps (capped at the
    /// run length).
    pub fn from_records(records: &[StepRecord], w: usize) -> Result<Self> {
        let coverage = global_coverage(records)?;
        let w = w.min(records.len());
        let series = local_coverage(records, w)?;
        let (local_mean, local_std) = mean_std(&series);
        let (mean_volume_covered, vacuous_fraction) = volume_stats(records)?;
        Ok(RunSummary {
            steps: records.len(),
            global_coverage: coverage,
            mean_volume_covered,
            local_window: w,
            local_mean,
            local_std,
            vacuous_fraction,
            local_coverage_series: series,
        })
    }

    /// Drops the per-step series, e.g. before writing a compact summary.
    pub fn without_series(mut self) -> Self {
        self.local_coverage_series.clear();
        self
    }
}
