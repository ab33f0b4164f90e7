//! Experiment configs, seeded runs over every method, result files and the
//! aggregated summary tables.
//!
//! A run writes three files per (env, method, seed) into the output
//! directory: `<stem>.steps.csv` with one row per evaluation step,
//! `<stem>.weights.csv` with the expert probabilities per step and
//! `<stem>.summary.json` with the run summary and the stream checksum.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptnc::{AdaptncConfig, RunOutput, StepRecord};
use crate::baselines::{run_method, Method};
use crate::envs::{EnvConfig, Stream};
use crate::error::{Error, Result};
use crate::metrics::{mean_std, RunSummary, DEFAULT_LOCAL_WINDOW};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ADAPTNC_THREADS";

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_local_window() -> usize {
    DEFAULT_LOCAL_WINDOW
}

/// One experiment: an environment, the methods to run on it and the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub adaptnc: AdaptncConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_local_window")]
    pub local_window: usize,
}

impl ExperimentConfig {
    pub fn new(env: EnvConfig) -> Self {
        ExperimentConfig {
            env,
            methods: default_methods(),
            adaptnc: AdaptncConfig::default(),
            seeds: default_seeds(),
            output_dir: default_output(),
            local_window: default_local_window(),
        }
    }

    /// Parses and validates a TOML config.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = unknown_key(&message).unwrap_or_else(|| "config".to_string());
            Error::config(key, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("path", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.adaptnc.validate()?;
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.local_window == 0 {
            return Err(Error::config("local_window", "must be at least 1"));
        }
        if self.env.steps() < 2 {
            return Err(Error::config("env.steps", "must be at least 2"));
        }
        Ok(())
    }
}

/// Pulls the field name out of serde's "unknown field `x`" messages.
fn unknown_key(message: &str) -> Option<String> {
    let rest = message.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

/// Parses `a..b` (exclusive) or `a..=b` (inclusive).
pub fn parse_seed_range(text: &str) -> Result<Range<u64>> {
    let bad = || Error::config("seeds", format!("expected `a..b` or `a..=b`, got `{text}`"));
    let (lo, hi, inclusive) = if let Some((lo, hi)) = text.split_once("..=") {
        (lo, hi, true)
    } else if let Some((lo, hi)) = text.split_once("..") {
        (lo, hi, false)
    } else {
        return Err(bad());
    };
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    let end = if inclusive {
        hi.checked_add(1).ok_or_else(bad)?
    } else {
        hi
    };
    if end <= lo {
        return Err(Error::config("seeds", format!("empty seed range `{text}`")));
    }
    Ok(lo..end)
}

/// Everything recorded about one (env, method, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub env: String,
    pub method: Method,
    pub seed: u64,
    pub stream_checksum: u64,
    pub output: RunOutput,
    pub summary: RunSummary,
}

/// The per-run summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub env: String,
    pub method: Method,
    pub seed: u64,
    /// Hex checksum of the generated stream; equal across methods that saw
    /// the same data.
    pub stream_checksum: String,
    pub adaptations: usize,
    pub fallbacks: usize,
    pub summary: RunSummary,
}

impl MethodRun {
    pub fn record(&self) -> RunRecord {
        let adaptations = self.output.adaptations.len();
        let fallbacks = self
            .output
            .adaptations
            .iter()
            .filter(|a| a.theta.is_none())
            .count();
        RunRecord {
            env: self.env.clone(),
            method: self.method,
            seed: self.seed,
            stream_checksum: format!("{:016x}", self.stream_checksum),
            adaptations,
            fallbacks,
            summary: self.summary.clone().without_series(),
        }
    }

    /// File name stem shared by the three output files.
    pub fn stem(&self) -> String {
        format!("{}__{}__seed{}", self.env, self.method, self.seed)
    }
}

/// Generates the stream for `seed` once and runs every configured method on
/// it.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<Vec<MethodRun>> {
    let stream = config.env.stream(config.adaptnc.calibration, seed)?;
    run_on_stream(config, &stream, seed)
}

/// Runs every configured method on an existing stream.
pub fn run_on_stream(
    config: &ExperimentConfig,
    stream: &Stream,
    seed: u64,
) -> Result<Vec<MethodRun>> {
    let checksum = stream.checksum();
    config
        .methods
        .iter()
        .map(|&method| {
            let output = run_method(
                method,
                &stream.calibration,
                stream.eval.iter().cloned(),
                &config.adaptnc,
                seed,
            )?;
            let summary = RunSummary::from_records(&output.records, config.local_window)?;
            Ok(MethodRun {
                env: config.env.name().to_string(),
                method,
                seed,
                stream_checksum: checksum,
                output,
                summary,
            })
        })
        .collect()
}

/// Thread pool honoring [`THREADS_ENV`].
fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| {
            Error::config(THREADS_ENV, format!("expected a thread count, got `{v}`"))
        })?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::Io(e.to_string()))
}

/// Runs `seeds` in parallel and writes every run's files into the output
/// directory. Returns the run records in seed order.
pub fn run_seeds(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunRecord>> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    let per_seed: Vec<Result<Vec<RunRecord>>> = pool()?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let runs = run_seed(config, seed)?;
                runs.iter()
                    .map(|run| {
                        write_run(&config.output_dir, run)?;
                        Ok(run.record())
                    })
                    .collect()
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in per_seed {
        records.extend(r?);
    }
    Ok(records)
}

/// Runs the seeds listed in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_seeds(config, &config.seeds)
}

/// Runs the seed range `seeds` instead of the configured seeds.
pub fn sweep(config: &ExperimentConfig, seeds: Range<u64>) -> Result<Vec<RunRecord>> {
    let seeds: Vec<u64> = seeds.collect();
    run_seeds(config, &seeds)
}

/// Formats a float for CSV output; infinities are spelled `inf`.
fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

pub const STEPS_HEADER: &str = "t,method,env,seed,alpha_bar,q,covered,volume,vacuous,theta_version";

/// Per-step CSV for one run.
pub fn steps_csv(env: &str, method: Method, seed: u64, records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(STEPS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            method,
            env,
            seed,
            num(r.alpha_bar),
            num(r.q),
            u8::from(r.covered),
            num(r.volume),
            u8::from(r.vacuous),
            r.theta_version
        );
    }
    out
}

/// Expert probability trace: `t, alpha_bar, p_0, ..., p_{k-1}`.
pub fn weights_csv(records: &[StepRecord]) -> String {
    let k = records.first().map_or(0, |r| r.weights.len());
    let mut out = String::from("t,alpha_bar");
    for i in 0..k {
        let _ = write!(out, ",p{i}");
    }
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{}", r.t, num(r.alpha_bar));
        for p in &r.weights {
            let _ = write!(out, ",{}", num(*p));
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the step CSV, weight trace and summary of one run.
pub fn write_run(dir: &Path, run: &MethodRun) -> Result<()> {
    let stem = run.stem();
    let steps = steps_csv(&run.env, run.method, run.seed, &run.output.records);
    write_atomic(&dir.join(format!("{stem}.steps.csv")), steps.as_bytes())?;
    let weights = weights_csv(&run.output.records);
    write_atomic(&dir.join(format!("{stem}.weights.csv")), weights.as_bytes())?;
    let summary =
        serde_json::to_string_pretty(&run.record()).map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(
        &dir.join(format!("{stem}.summary.json")),
        summary.as_bytes(),
    )?;
    Ok(())
}

/// Reads every `*.summary.json` in `dir`.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".summary.json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Seed-averaged statistics of one (env, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub env: String,
    pub method: Method,
    pub seeds: usize,
    pub coverage: f64,
    pub volume: f64,
    pub local_mean: f64,
    pub local_std: f64,
    pub vacuous: f64,
}

/// Method-by-environment summary tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub envs: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Tables {
    pub fn row(&self, env: &str, method: Method) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.env == env && r.method == method)
    }

    /// Coverage, volume and local coverage per method and environment.
    pub fn coverage_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:<14} {:>9} {:>12} {:>18}",
            "method", "env", "coverage", "volume", "local coverage"
        );
        for m in Method::ALL {
            for env in &self.envs {
                if let Some(r) = self.row(env, m) {
                    let _ = writeln!(
                        out,
                        "{:<20} {:<14} {:>8.2}% {:>12} {:>9.2}% ± {:>5.2}%",
                        m.label(),
                        env,
                        100.0 * r.coverage,
                        format_volume(r.volume),
                        100.0 * r.local_mean,
                        100.0 * r.local_std
                    );
                }
            }
        }
        out
    }

    /// Fraction of vacuous steps per method and environment.
    pub fn vacuity_table(&self) -> String {
        let mut out = format!("{:<20}", "method");
        for env in &self.envs {
            let _ = write!(out, " {env:>14}");
        }
        out.push('\n');
        for m in Method::ALL {
            let _ = write!(out, "{:<20}", m.label());
            for env in &self.envs {
                match self.row(env, m) {
                    Some(r) => {
                        let _ = write!(out, " {:>13.2}%", 100.0 * r.vacuous);
                    }
                    None => {
                        let _ = write!(out, " {:>14}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Fixed-point for ordinary magnitudes, scientific below 0.01.
fn format_volume(v: f64) -> String {
    if v != 0.0 && v.abs() < 0.01 {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

/// Aggregates run records into tables. Every environment present must have
/// runs for all four methods; otherwise the missing cells are reported.
pub fn tables_from_records(records: &[RunRecord]) -> Result<Tables> {
    if records.is_empty() {
        return Err(Error::MissingRuns(vec!["no runs found".to_string()]));
    }
    let mut cells: BTreeMap<(String, Method), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.env.clone(), r.method)).or_default().push(r);
    }
    let envs: BTreeSet<String> = records.iter().map(|r| r.env.clone()).collect();
    let missing: Vec<String> = envs
        .iter()
        .flat_map(|e| Method::ALL.iter().map(move |m| (e, m)))
        .filter(|(e, m)| !cells.contains_key(&((*e).clone(), **m)))
        .map(|(e, m)| format!("{e}/{m}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingRuns(missing));
    }
    let rows = cells
        .into_iter()
        .map(|((env, method), runs)| {
            let pick = |f: fn(&RunSummary) -> f64| -> Vec<f64> {
                runs.iter().map(|r| f(&r.summary)).collect()
            };
            let finite_mean = |xs: Vec<f64>| {
                let xs: Vec<f64> = xs.into_iter().filter(|x| x.is_finite()).collect();
                if xs.is_empty() {
                    f64::NAN
                } else {
                    mean_std(&xs).0
                }
            };
            TableRow {
                env,
                method,
                seeds: runs.len(),
                coverage: mean_std(&pick(|s| s.global_coverage)).0,
                volume: finite_mean(pick(|s| s.mean_volume_covered)),
                local_mean: mean_std(&pick(|s| s.local_mean)).0,
                local_std: mean_std(&pick(|s| s.local_std)).0,
                vacuous: mean_std(&pick(|s| s.vacuous_fraction)).0,
            }
        })
        .collect();
    Ok(Tables {
        envs: envs.into_iter().collect(),
        rows,
    })
}

/// Loads every run summary in `dir` and builds the tables.
pub fn reproduce_tables(dir: &Path) -> Result<Tables> {
    tables_from_records(&load_records(dir)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::GmmConfig;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..10").unwrap(), 0..10);
        assert_eq!(parse_seed_range("3..=5").unwrap(), 3..6);
        assert!(parse_seed_range("5..5").is_err());
        assert!(parse_seed_range("a..b").is_err());
        assert!(parse_seed_range("7").is_err());
    }

    #[test]
    fn csv_spells_infinity() {
        let r = StepRecord {
            t: 3,
            alpha_bar: -0.01,
            q: f64::INFINITY,
            score: 1.0,
            covered: true,
            volume: f64::INFINITY,
            vacuous: true,
            weights: vec![0.5, 0.5],
            theta_version: 2,
        };
        let csv = steps_csv("gmm", Method::Adaptnc, 7, std::slice::from_ref(&r));
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line, "3,adaptnc,gmm,7,-0.01,inf,1,inf,1,2");
        let w = weights_csv(&[r]);
        assert_eq!(w, "t,alpha_bar,p0,p1\n3,-0.01,0.5,0.5\n");
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_toml("bogus = 1\n[env]\nkind = \"gmm\"\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_alpha_names_the_key() {
        let text = "[env]\nkind = \"gmm\"\n[adaptnc]\ntarget_alpha = 1.5\n";
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("target_alpha"), "{err}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::new(EnvConfig::Gmm(GmmConfig::default()));
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_cells_are_listed() {
        let summary = RunSummary {
            steps: 1,
            global_coverage: 1.0,
            mean_volume_covered: 1.0,
            local_window: 1,
            local_mean: 1.0,
            local_std: 0.0,
            vacuous_fraction: 0.0,
            local_coverage_series: Vec::new(),
        };
        let rec = |m| RunRecord {
            env: "gmm".into(),
            method: m,
            seed: 0,
            stream_checksum: "0".into(),
            adaptations: 0,
            fallbacks: 0,
            summary: summary.clone(),
        };
        let err = tables_from_records(&[rec(Method::SplitCp), rec(Method::Adaptnc)]).unwrap_err();
        assert_eq!(
            err,
            Error::MissingRuns(vec!["gmm/dtaci".into(), "gmm/adaptnc_no_replay".into()])
        );
        let all: Vec<RunRecord> = Method::ALL.iter().map(|&m| rec(m)).collect();
        let tables = tables_from_records(&all).unwrap();
        assert_eq!(tables.rows.len(), 4);
        assert!(tables.coverage_table().contains("AdaptNC w/o Replay"));
        assert!(tables.vacuity_table().contains("0.00%"));
    }
}
