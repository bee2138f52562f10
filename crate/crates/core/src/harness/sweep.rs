//! Monte-Carlo driver: sweep points × trials × estimators.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{EstimatorKind, ExperimentConfig};
use crate::baselines::{build_cascaded_model, default_ridge, ls_estimate, omp_budget, omp_estimate};
use crate::error::Result;
use crate::estimator::{run, EstimateSet};
use crate::evaluation::{evaluate, power_total, MetricRecord, Metrics, PowerPoint};
use crate::trial::{TrialData, TrialSpec};

/// Seed of trial `trial`, derived from the base seed. Every sweep point
/// reuses it, so channel draws are shared along the sweep axis. Feeding it
/// to [`ChaCha8Rng::seed_from_u64`] regenerates the trial.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

/// Run one estimator on a generated trial.
pub fn estimate(kind: EstimatorKind, data: &TrialData, spec: &TrialSpec, cfg: &ExperimentConfig) -> Result<EstimateSet> {
    match kind {
        EstimatorKind::Visbl => Ok(run(&data.dict, &data.protocol, &data.meas, data.noise, &cfg.visbl)?.estimate),
        EstimatorKind::Omp | EstimatorKind::Ls => {
            let model = build_cascaded_model(&data.protocol, &data.dict)?;
            if kind == EstimatorKind::Omp {
                let sc = &spec.scenario;
                let budget = match cfg.baselines.omp_budget {
                    0 => omp_budget(spec.users, sc.paths_ib, sc.paths_ui, sc.paths_ub, &model),
                    b => b,
                };
                omp_estimate(&data.meas.y, &model, budget)
            } else {
                let ridge = match cfg.baselines.ridge {
                    r if r >= 0.0 => r,
                    _ => default_ridge(&data.meas.y, &model, data.noise.sigma_b2),
                };
                ls_estimate(&data.meas.y, &model, ridge)
            }
        }
    }
}

/// Operating power of an estimator: the baselines ignore the sensors and
/// are charged as a passive surface.
pub fn operating_power(kind: EstimatorKind, spec: &TrialSpec, cfg: &ExperimentConfig) -> f64 {
    let n_a = if kind == EstimatorKind::Visbl { spec.n_a } else { 0 };
    let op = PowerPoint {
        bs_antennas: spec.bs_antennas,
        n_a,
        bits: spec.bits,
        bandwidth: spec.scenario.bandwidth_hz,
        t: spec.t,
        t_c: spec.t_c,
    };
    power_total(&cfg.power, &op)
}

/// Estimate and score one estimator on a trial.
pub fn score(kind: EstimatorKind, data: &TrialData, spec: &TrialSpec, cfg: &ExperimentConfig) -> Result<Metrics> {
    let est = estimate(kind, data, spec, cfg)?;
    let sc = &spec.scenario;
    evaluate(
        &est,
        &data.channels,
        sc.data_tx_power_w(),
        data.noise.sigma_b2,
        operating_power(kind, spec, cfg),
        sc.bandwidth_hz,
    )
}

/// Rows of a run plus failure bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct RunResult {
    pub records: Vec<MetricRecord>,
    /// `(row index, message)` of estimator failures; those rows hold NaN.
    pub failures: Vec<(usize, String)>,
}

fn failed_metrics(power_w: f64) -> Metrics {
    Metrics {
        nmse_f_db: Some(f64::NAN),
        nmse_g_db: Some(f64::NAN),
        nmse_h_db: f64::NAN,
        nmse_casc_db: f64::NAN,
        se: f64::NAN,
        power_w,
        ee: f64::NAN,
    }
}

type Row = (MetricRecord, Option<String>);

fn run_trial(cfg: &ExperimentConfig, name: &str, value: f64, trial: usize) -> Result<Vec<Row>> {
    let spec = cfg.spec_at(value);
    let seed = trial_seed(cfg.seed, trial);
    let data = spec.generate(&mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(cfg
        .estimators
        .iter()
        .map(|&kind| {
            let (m, err) = match score(kind, &data, &spec, cfg) {
                Ok(m) => (m, None),
                Err(e) => {
                    log::warn!("{} failed on {name}={value} trial {trial}: {e}", kind.name());
                    (failed_metrics(operating_power(kind, &spec, cfg)), Some(e.to_string()))
                }
            };
            let record = MetricRecord {
                sweep_name: name.to_string(),
                sweep_value: value,
                trial,
                estimator: kind.name().to_string(),
                nmse_f_db: m.nmse_f_db,
                nmse_g_db: m.nmse_g_db,
                nmse_h_db: m.nmse_h_db,
                nmse_casc_db: m.nmse_casc_db,
                se: m.se,
                power_w: m.power_w,
                ee: m.ee,
                seed,
            };
            (record, err)
        })
        .collect())
}

/// Run every trial of every sweep point. Trials run in parallel; rows come
/// back ordered by point, trial, then estimator.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let tasks: Vec<(String, f64, usize)> = cfg
        .points()
        .into_iter()
        .flat_map(|(name, value)| (0..cfg.trials).map(move |t| (name.clone(), value, t)))
        .collect();
    let rows: Vec<Vec<Row>> =
        tasks.par_iter().map(|(name, value, t)| run_trial(cfg, name, *value, *t)).collect::<Result<_>>()?;
    let mut out = RunResult::default();
    for (record, err) in rows.into_iter().flatten() {
        if let Some(e) = err {
            out.failures.push((out.records.len(), e));
        }
        out.records.push(record);
    }
    Ok(out)
}
