//! Experiment harness: configuration, Monte-Carlo sweeps and result files.

pub mod config;
pub mod output;
pub mod sweep;

use std::path::Path;
use std::time::Instant;

pub use config::{apply_override, BaselineConfig, EstimatorKind, ExperimentConfig, GeometryConfig, SweepAxis, SweepConfig, TrainingSection};
pub use output::{write_csv, write_outputs, Manifest, OutputFiles, CSV_HEADER};
pub use sweep::{estimate, operating_power, run_experiment, score, trial_seed, RunResult};

use crate::error::Result;

/// Run a configured experiment and write its files into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<(RunResult, OutputFiles)> {
    let start = Instant::now();
    let res = run_experiment(cfg)?;
    let files = write_outputs(dir, cfg, &res, start.elapsed().as_secs_f64())?;
    Ok((res, files))
}
