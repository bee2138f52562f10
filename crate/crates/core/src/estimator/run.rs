use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::free_energy::free_energy;
use super::sensor::update_f_sensor;
use super::updates::{update_f_blocks, update_g_blocks, update_gamma, update_h_blocks, update_u, update_u_active};
use super::{block_ranges, EstimateSet, GaussianFactor, HyperParams, Model, PartitionSpec, PosteriorState, SensorFactor, StopRule};
use crate::channel::SteeringDictionary;
use crate::error::Result;
use crate::linalg::{vectorize, CVec};
use crate::measurement::{MeasurementSet, NoiseLevels, TrainingProtocol};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisblConfig {
    pub hyper: HyperParams,
    pub partition: PartitionSpec,
    pub stop: StopRule,
    /// Iteration cap of each initialization loop.
    pub init_iters: usize,
    /// Update `q(f)` and `q(u)` jointly (exact minimisation over both)
    /// instead of one alternating step each. With a small sensor noise the
    /// alternation needs thousands of sweeps to settle.
    pub joint_sensor_update: bool,
    /// Read `a`, `b` in units of each factor's average per-entry power
    /// (estimated from the data) instead of absolute units.
    pub normalize_hyper: bool,
    pub track_free_energy: bool,
}

impl Default for VisblConfig {
    fn default() -> Self {
        Self {
            hyper: HyperParams::default(),
            partition: PartitionSpec::default(),
            stop: StopRule::default(),
            init_iters: 30,
            joint_sensor_update: true,
            normalize_hyper: true,
            track_free_energy: false,
        }
    }
}

impl VisblConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.stop.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    /// Free energy after initialization and after every sweep (if tracked).
    pub free_energy: Vec<f64>,
    /// Relative change of the concatenated means per sweep.
    pub mean_change: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Narrow-interval fallbacks in the final sensor update.
    pub approximate_u: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub estimate: EstimateSet,
    pub state: PosteriorState,
    pub trace: Trace,
}

fn rel_change(new: &CVec, old: &CVec) -> f64 {
    let d = (new - old).norm();
    let base = old.norm();
    if base > 0.0 {
        d / base
    } else if d > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Moment estimates of the average per-entry power of `f`, `g` and `h`,
/// treating every entry as i.i.d. Each is floored at the level a 0 dB
/// signal would give.
pub fn factor_powers(model: &Model) -> [f64; 3] {
    let (m_g, n_g, t) = (model.m_g() as f64, model.n_g() as f64, model.slots());
    let (sb2, si2) = (1.0 / model.beta_b, 1.0 / model.beta_i);
    let px: Vec<f64> = (0..t).map(|j| model.x.column(j).norm_squared()).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let m = model.y.nrows() as f64;

    let mut z_pow = Vec::new();
    let mut z_px = Vec::new();
    for j in 0..t {
        for i in 0..model.omega.nrows() {
            if model.omega[(i, j)] != 0.0 {
                z_pow.push(model.z_hat[(i, j)].norm_sqr());
                z_px.push(px[j]);
            }
        }
    }
    let all_px = mean(&px);
    let v_f = if z_pow.is_empty() {
        si2 / (n_g * all_px)
    } else {
        (mean(&z_pow) - si2).max(si2) / (n_g * mean(&z_px))
    };

    let warm = if model.warmup_off > 0 { 0..model.warmup_off } else { 0..t };
    let y_pow = |r: std::ops::Range<usize>| r.map(|j| model.y.column(j).norm_squared()).sum::<f64>();
    let warm_px = mean(&px[warm.clone()]);
    let warm_pow = y_pow(warm.clone()) / (m * warm.len() as f64);
    let v_h = (warm_pow - sb2).max(sb2) / (m_g * warm_px);

    let lit = model.warmup_off..t;
    let v_g = if lit.is_empty() {
        sb2 / (m_g * n_g * n_g * v_f * all_px)
    } else {
        let pow = y_pow(lit.clone()) / (m * lit.len() as f64);
        let direct = m_g * v_h * mean(&px[lit.clone()]);
        let sx = mean(&lit.map(|j| model.s.column(j).norm_squared() * px[j]).collect::<Vec<_>>());
        (pow - sb2 - direct).max(sb2) / (m_g * n_g * n_g * v_f * sx.max(f64::MIN_POSITIVE))
    };
    [v_f, v_g, v_h]
}

/// Initial posterior: the UE-IRS factor from sensor data alone, the UE-BS
/// factor from the reflectors-off slots, and a prior-only IRS-BS factor.
pub fn init_posterior(model: &Model, cfg: &VisblConfig) -> Result<PosteriorState> {
    let [hf, hg, hh] = if cfg.normalize_hyper {
        factor_powers(model).map(|p| cfg.hyper.in_units(p))
    } else {
        [cfg.hyper; 3]
    };
    let part = &cfg.partition;
    let n_entries = model.a_i.nrows() * model.slots();
    let mut st = PosteriorState {
        f: GaussianFactor::prior(model.len_f(), block_ranges(model.len_f(), part.s_f)?, &hf),
        g: GaussianFactor::prior(model.len_g(), block_ranges(model.len_g(), part.s_g)?, &hg),
        h: GaussianFactor::prior(model.len_h(), block_ranges(model.len_h(), part.s_h)?, &hh),
        u: SensorFactor {
            mean: vectorize(&model.z_hat),
            var: DVector::zeros(n_entries),
            entropy: DVector::zeros(n_entries),
            approximate: 0,
        },
    };

    if model.active_count() > 0 {
        let mut sensor_only = model.clone();
        sensor_only.beta_b = 0.0;
        for _ in 0..cfg.init_iters {
            let prev = st.f.mean.clone();
            update_f(&sensor_only, &mut st, cfg)?;
            update_gamma(&mut st.f);
            if rel_change(&st.f.mean, &prev) < cfg.stop.rel_tol {
                break;
            }
        }
    }
    // Keep the sensor factor consistent with the final f even when the loop is skipped.
    update_u(model, &mut st);

    if model.warmup_off > 0 {
        let warm = model.leading_slots(model.warmup_off);
        for _ in 0..cfg.init_iters {
            let prev = st.h.mean.clone();
            update_h_blocks(&warm, &mut st)?;
            update_gamma(&mut st.h);
            if rel_change(&st.h.mean, &prev) < cfg.stop.rel_tol {
                break;
            }
        }
    }
    Ok(st)
}

/// `q(f)` then `q(u)` on the active entries, jointly or one step each.
fn update_f(model: &Model, st: &mut PosteriorState, cfg: &VisblConfig) -> Result<()> {
    if cfg.joint_sensor_update {
        update_f_sensor(model, st)?;
    } else {
        update_f_blocks(model, st)?;
        update_u_active(model, st);
    }
    Ok(())
}

/// One sweep in the order g, γ_g, h, γ_h, f and u, γ_f.
pub fn sweep(model: &Model, st: &mut PosteriorState, cfg: &VisblConfig) -> Result<()> {
    update_g_blocks(model, st)?;
    update_gamma(&mut st.g);
    update_h_blocks(model, st)?;
    update_gamma(&mut st.h);
    update_f(model, st, cfg)?;
    update_gamma(&mut st.f);
    Ok(())
}

/// Run the estimator on a prepared model.
pub fn run_model(model: &Model, cfg: &VisblConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut st = init_posterior(model, cfg)?;
    let mut trace = Trace::default();
    if cfg.track_free_energy {
        trace.free_energy.push(free_energy(model, &st)?);
    }
    for it in 0..cfg.stop.max_iters {
        let prev = st.concat_means();
        sweep(model, &mut st, cfg)?;
        let change = rel_change(&st.concat_means(), &prev);
        trace.mean_change.push(change);
        trace.iterations = it + 1;
        if cfg.track_free_energy {
            trace.free_energy.push(free_energy(model, &st)?);
        }
        if change < cfg.stop.rel_tol {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        log::warn!("estimator stopped after {} sweeps without meeting the tolerance", trace.iterations);
    }
    trace.approximate_u = st.u.approximate;
    let estimate = st.estimates(model)?;
    Ok(RunOutput { estimate, state: st, trace })
}

/// Build the model and run the estimator.
pub fn run(
    dict: &SteeringDictionary,
    tp: &TrainingProtocol,
    meas: &MeasurementSet,
    noise: NoiseLevels,
    cfg: &VisblConfig,
) -> Result<RunOutput> {
    let model = Model::new(dict, tp, meas, noise)?;
    run_model(&model, cfg)
}
