//! Full pipeline: run every benchmark config over a few seeds, write the
//! per-run files, then aggregate them into coverage and vacuity tables.
//!
//! Run with `cargo run --release --example reproduce_tables [out_dir] [seeds]`.

use std::path::PathBuf;

use adaptnc::experiment::{reproduce_tables, run_seeds, ExperimentConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("adaptnc-tables"));
    let seeds: u64 = args
        .next()
        .map(|s| s.parse().expect("seed count"))
        .unwrap_or(3);
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["gmm", "localization", "socialnav", "multirotor"] {
        let mut config =
            ExperimentConfig::load(&configs.join(format!("{name}.toml"))).expect("config");
        config.output_dir = out.clone();
        let seed_list: Vec<u64> = (0..seeds).collect();
        let records = run_seeds(&config, &seed_list).expect("runs");
        println!("{name}: {} runs written", records.len());
    }
    let tables = reproduce_tables(&out).expect("tables");
    println!("\n{}", tables.coverage_table());
    println!("{}", tables.vacuity_table());
    println!("files in {}", out.display());
}
