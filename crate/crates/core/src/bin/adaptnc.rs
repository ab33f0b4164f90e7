//! Command-line driver: run a config, sweep seeds, or tabulate results.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 for runtime
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptnc::experiment::{self, ExperimentConfig, RunRecord};
use adaptnc::{Error, Method};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adaptnc",
    version,
    about = "Online conformal prediction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Run only these methods (repeatable): split_cp, dtaci, adaptnc_no_replay, adaptnc.
    #[arg(long = "method")]
    methods: Vec<Method>,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method on the seeds listed in the config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the config over a seed range such as `0..10` or `0..=9`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seeds: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print coverage and vacuity tables for the runs in a directory.
    Report { dir: PathBuf },
}

fn load(path: &Path, overrides: Overrides) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if !overrides.methods.is_empty() {
        config.methods = overrides.methods;
    }
    if let Some(dir) = overrides.output {
        config.output_dir = dir;
    }
    config.validate()?;
    Ok(config)
}

fn print_records(records: &[RunRecord]) {
    for r in records {
        let s = &r.summary;
        println!(
            "{} {} seed={} coverage={:.4} volume={:.4} local_std={:.4} vacuous={:.4} stream={}",
            r.env,
            r.method,
            r.seed,
            s.global_coverage,
            s.mean_volume_covered,
            s.local_std,
            s.vacuous_fraction,
            r.stream_checksum
        );
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, overrides } => {
            let config = load(&config, overrides)?;
            print_records(&experiment::run_experiment(&config)?);
        }
        Command::Sweep {
            config,
            seeds,
            overrides,
        } => {
            let range = experiment::parse_seed_range(&seeds)?;
            let config = load(&config, overrides)?;
            print_records(&experiment::sweep(&config, range)?);
        }
        Command::Report { dir } => {
            let tables = experiment::reproduce_tables(&dir)?;
            println!("{}", tables.coverage_table());
            println!("{}", tables.vacuity_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
