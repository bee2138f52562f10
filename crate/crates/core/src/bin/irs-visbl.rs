use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irs_visbl::harness::{output, run_to_dir, score, ExperimentConfig};
use irs_visbl::{selftest, Error};

#[derive(Parser)]
#[command(version, about = "VI-SBL channel estimation simulator for semi-passive IRS links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted `key=value` override, repeatable (e.g. `training.n_a=8`).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write metrics, manifest and plot script.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Exit with status 3 if any estimator fails.
        #[arg(long)]
        strict: bool,
    },
    /// One trial at the base point; prints a CSV row per estimator.
    Estimate {
        #[command(flatten)]
        common: Common,
    },
    /// Internal consistency checks.
    Selftest,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_ESTIMATOR: u8 = 3;

fn load(common: &Common, extra: Vec<String>) -> irs_visbl::Result<ExperimentConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    overrides.extend(extra);
    match &common.config {
        Some(p) => ExperimentConfig::load(p, &overrides),
        None => ExperimentConfig::from_toml_str("", &overrides),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if matches!(e, Error::Config(_)) { EXIT_CONFIG } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, out, trials, strict } => {
            let extra = trials.map(|t| format!("trials={t}")).into_iter().collect();
            let mut cfg = match load(&common, extra) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let (res, files) = match run_to_dir(&cfg, &cfg.output_dir) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            println!("wrote {} rows to {}", res.records.len(), files.metrics.display());
            if !res.failures.is_empty() {
                eprintln!("{} estimator failure(s); first: {}", res.failures.len(), res.failures[0].1);
                if strict {
                    return ExitCode::from(EXIT_ESTIMATOR);
                }
            }
            ExitCode::SUCCESS
        }
        Command::Estimate { common } => {
            let cfg = match load(&common, Vec::new()) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let spec = cfg.trial_spec();
            let data = match spec.generate(&mut ChaCha8Rng::seed_from_u64(cfg.seed)) {
                Ok(d) => d,
                Err(e) => return fail(&e),
            };
            println!("{}", output::CSV_HEADER.join(","));
            let mut failed = false;
            for &kind in &cfg.estimators {
                match score(kind, &data, &spec, &cfg) {
                    Ok(m) => {
                        let rec = irs_visbl::evaluation::MetricRecord {
                            sweep_name: "none".into(),
                            sweep_value: 0.0,
                            trial: 0,
                            estimator: kind.name().into(),
                            nmse_f_db: m.nmse_f_db,
                            nmse_g_db: m.nmse_g_db,
                            nmse_h_db: m.nmse_h_db,
                            nmse_casc_db: m.nmse_casc_db,
                            se: m.se,
                            power_w: m.power_w,
                            ee: m.ee,
                            seed: cfg.seed,
                        };
                        println!("{}", output::csv_fields(&rec).join(","));
                    }
                    Err(e) => {
                        eprintln!("{} failed: {e}", kind.name());
                        failed = true;
                    }
                }
            }
            if failed {
                ExitCode::from(EXIT_ESTIMATOR)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
