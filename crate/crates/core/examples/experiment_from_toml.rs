//! Load a TOML experiment, apply overrides and print per-point means.
//!
//! `cargo run --release --example experiment_from_toml [config.toml] [key=value ...]`

use std::collections::BTreeMap;
use std::path::PathBuf;

use irs_visbl::harness::{run_experiment, ExperimentConfig};

fn main() -> irs_visbl::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/desk.toml"));
    let overrides: Vec<String> = args.collect();
    let cfg = ExperimentConfig::load(&path, &overrides)?;
    println!("config {} (sha256 {})", path.display(), &cfg.hash()[..16]);

    let res = run_experiment(&cfg)?;
    let mut table: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in &res.records {
        let e = table.entry((format!("{:>8}", r.sweep_value), r.estimator.clone())).or_default();
        e.0 += r.nmse_casc_db;
        e.1 += 1;
    }
    for ((point, est), (sum, n)) in table {
        println!("{point} {est:<6} {:>8.2} dB over {n} trials", sum / n as f64);
    }
    if !res.failures.is_empty() {
        println!("{} estimator failures", res.failures.len());
    }
    Ok(())
}
