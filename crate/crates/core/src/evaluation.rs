//! Estimation error, rate, power and energy-efficiency metrics.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{dim_err, Error, Result};
use crate::estimator::EstimateSet;
use crate::linalg::{db10, frobenius_sq, CMat, CVec, C64, J};

/// `‖est − truth‖² / ‖truth‖²`.
pub fn nmse(est: &CMat, truth: &CMat) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(dim_err(format!("estimate is {:?}, truth is {:?}", est.shape(), truth.shape())));
    }
    let denom = frobenius_sq(truth);
    if denom == 0.0 {
        return Err(Error::Domain("NMSE against an all-zero channel".into()));
    }
    Ok(frobenius_sq(&(est - truth)) / denom)
}

/// NMSE in dB; an exact estimate maps to `-inf`.
pub fn nmse_db(est: &CMat, truth: &CMat) -> Result<f64> {
    nmse(est, truth).map(db10)
}

/// Circuit power constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModel {
    /// Resolution of the BS converters.
    pub b_inf: u32,
    /// Converter figure of merit, J per conversion step.
    pub fom: f64,
    /// Sampling rate, Hz.
    pub f_s: f64,
    /// Fronthaul power per bit/s, W.
    pub p_t: f64,
    /// Local oscillator, W.
    pub p_lo: f64,
    /// RF chain, W.
    pub p_rf: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self { b_inf: 10, fom: 1432.1e-15, f_s: 80e6, p_t: 0.25e-9, p_lo: 22.5e-3, p_rf: 31.6e-3 }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.fom, self.f_s, self.p_t, self.p_lo, self.p_rf];
        if self.b_inf == 0 || vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(crate::error::config_err("power model constants must be positive"));
        }
        Ok(())
    }

    /// Power of one `bits`-bit converter.
    pub fn adc(&self, bits: u32) -> f64 {
        self.fom * self.f_s * 2f64.powi(bits as i32)
    }

    pub fn bs(&self, bs_antennas: usize) -> f64 {
        self.p_lo + bs_antennas as f64 * (self.p_rf + 2.0 * self.adc(self.b_inf))
    }

    pub fn sensors(&self, n_a: usize, bits: u32) -> f64 {
        self.p_lo + n_a as f64 * (self.p_rf + 2.0 * self.adc(bits))
    }

    pub fn fronthaul(&self, n_a: usize, bits: u32, bandwidth: f64) -> f64 {
        2.0 * bits as f64 * n_a as f64 * bandwidth * self.p_t
    }
}

/// Operating point for [`power_total`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub bs_antennas: usize,
    pub n_a: usize,
    pub bits: u32,
    pub bandwidth: f64,
    pub t: usize,
    pub t_c: usize,
}

/// Average power over a coherence block; sensors and fronthaul only run
/// during the `T` training slots.
pub fn power_total(pm: &PowerModel, op: &PowerPoint) -> f64 {
    let bs = pm.bs(op.bs_antennas);
    if op.n_a == 0 {
        return bs;
    }
    let duty = op.t as f64 / op.t_c as f64;
    bs + duty * (pm.sensors(op.n_a, op.bits) + pm.fronthaul(op.n_a, op.bits, op.bandwidth))
}

pub fn energy_efficiency(se: f64, power: f64, bandwidth: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::Domain(format!("power must be positive, got {power}")));
    }
    Ok(bandwidth * se / power)
}

fn user_cascade(cascaded: &CMat, k: usize, m: usize) -> CMat {
    CMat::from_column_slice(m, cascaded.nrows() / m, cascaded.column(k).as_slice())
}

/// IRS phases aligning the estimated cascade of the strongest user with
/// the dominant left singular vector of that cascade.
pub fn align_phases(est: &EstimateSet, m: usize) -> CVec {
    let k = est.cascaded.ncols();
    let n = est.cascaded.nrows() / m;
    let mut best = (0, -1.0);
    for u in 0..k {
        let p = est.cascaded.column(u).norm_squared();
        if p > best.1 {
            best = (u, p);
        }
    }
    let c = user_cascade(&est.cascaded, best.0, m);
    let svd = c.clone().svd(true, false);
    let lead = svd.singular_values.imax();
    let r = svd.u.expect("requested").column(lead).into_owned();
    let target = r.dotc(&est.h_bar.column(best.0)).arg();
    CVec::from_fn(n, |i, _| (J * (target - r.dotc(&c.column(i)).arg())).exp())
}

/// Effective channels `C_k v + h_k` as the columns of an `M × K` matrix.
pub fn effective_channels(cascaded: &CMat, h_bar: &CMat, v: &CVec) -> CMat {
    let m = h_bar.nrows();
    let mut out = h_bar.clone();
    for k in 0..h_bar.ncols() {
        let c = user_cascade(cascaded, k, m);
        let mut col = out.column_mut(k);
        col += c * v;
    }
    out
}

/// Per-user SINR with combiners `w` on true channels `h` at transmit power `p`.
pub fn sinr(w: &CMat, h: &CMat, p: f64, noise: f64) -> Vec<f64> {
    (0..h.ncols())
        .map(|k| {
            let wk = w.column(k);
            let sig = p * wk.dotc(&h.column(k)).norm_sqr();
            let intf: f64 = (0..h.ncols()).filter(|&j| j != k).map(|j| p * wk.dotc(&h.column(j)).norm_sqr()).sum();
            let den = intf + noise * wk.norm_squared();
            if den > 0.0 {
                sig / den
            } else {
                0.0
            }
        })
        .collect()
}

/// LMMSE combiners `(P Ĥ Ĥᴴ + σ² I)⁻¹ Ĥ`.
pub fn mmse_combiner(h_est: &CMat, p: f64, noise: f64) -> CMat {
    let m = h_est.nrows();
    let mut cov = h_est * h_est.adjoint() * C64::new(p, 0.0);
    for i in 0..m {
        cov[(i, i)] += noise;
    }
    cov.lu().solve(h_est).expect("noise loading keeps the covariance invertible")
}

/// Uplink sum rate after phase alignment and MMSE combining, both driven by
/// the estimate, evaluated on the true channels.
pub fn sum_spectral_efficiency(est: &EstimateSet, truth: &ChannelSet, p: f64, noise: f64) -> Result<f64> {
    let m = truth.h_bar.nrows();
    let true_casc = truth.cascaded();
    if est.cascaded.shape() != true_casc.shape() || est.h_bar.shape() != truth.h_bar.shape() {
        return Err(dim_err("estimate and truth shapes differ"));
    }
    let v = align_phases(est, m);
    let h_est = effective_channels(&est.cascaded, &est.h_bar, &v);
    let h_true = effective_channels(&true_casc, &truth.h_bar, &v);
    let w = mmse_combiner(&h_est, p, noise);
    Ok(sinr(&w, &h_true, p, noise).iter().map(|s| (1.0 + s).log2()).sum())
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub sweep_name: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub estimator: String,
    /// `None` when the estimator does not separate the links.
    pub nmse_f_db: Option<f64>,
    pub nmse_g_db: Option<f64>,
    pub nmse_h_db: f64,
    pub nmse_casc_db: f64,
    pub se: f64,
    pub power_w: f64,
    pub ee: f64,
    pub seed: u64,
}

/// Link NMSEs and rate metrics of one estimate; `power` is the operating
/// point of the estimator that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub nmse_f_db: Option<f64>,
    pub nmse_g_db: Option<f64>,
    pub nmse_h_db: f64,
    pub nmse_casc_db: f64,
    pub se: f64,
    pub power_w: f64,
    pub ee: f64,
}

pub fn evaluate(est: &EstimateSet, truth: &ChannelSet, p: f64, noise: f64, power_w: f64, bandwidth: f64) -> Result<Metrics> {
    let opt = |e: &Option<CMat>, t: &CMat| e.as_ref().map(|e| nmse_db(e, t)).transpose();
    let se = sum_spectral_efficiency(est, truth, p, noise)?;
    Ok(Metrics {
        nmse_f_db: opt(&est.f_bar, &truth.f_bar)?,
        nmse_g_db: opt(&est.g_bar, &truth.g_bar)?,
        nmse_h_db: nmse_db(&est.h_bar, &truth.h_bar)?,
        nmse_casc_db: nmse_db(&est.cascaded, &truth.cascaded())?,
        se,
        power_w,
        ee: energy_efficiency(se, power_w, bandwidth)?,
    })
}
