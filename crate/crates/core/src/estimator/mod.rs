//! Variational sparse Bayesian learning (VI-SBL) estimator for the UE-IRS,
//! IRS-BS and UE-BS links from BS observations and quantized sensor data.
//!
//! Angular unknowns are vectorized column-major: `f = vec(F)` with
//! `F ∈ C^{N_g×K}`, `g = vec(G)` with `G ∈ C^{M_g×N_g}`, `h = vec(H)` with
//! `H ∈ C^{M_g×K}`. Each carries per-coefficient Gamma precisions.

mod expectations;
mod free_energy;
mod run;
mod sensor;
pub mod truncnorm;
mod updates;

use std::ops::Range;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::channel::{cascaded_channel, SteeringDictionary};
use crate::error::{config_err, dim_err, Result};
use crate::linalg::{kron, reshape, CMat, CVec, RMat, C64};
use crate::measurement::{MeasurementSet, NoiseLevels, TrainingProtocol};

pub use expectations::{expect_afg_gram, expect_agf_gram, KronGram};
pub use free_energy::{digamma, free_energy};
pub use run::{factor_powers, init_posterior, run, run_model, sweep, RunOutput, Trace, VisblConfig};
pub use sensor::update_f_sensor;
pub use truncnorm::{trunc_gauss_moments, TruncMoments};
pub use updates::{
    update_f_blocks, update_g_blocks, update_gamma, update_gammas, update_h_blocks, update_u,
    update_u_active,
};

/// Gamma hyperprior shape `a` and rate `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    pub a: f64,
    pub b: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self { a: 1e-6, b: 1e-6 }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(config_err(format!("hyperparameters must be positive, got a = {}, b = {}", self.a, self.b)));
        }
        Ok(())
    }

    /// Posterior shape, fixed across iterations.
    pub fn shape(&self) -> f64 {
        self.a + 1.0
    }

    /// Same prior expressed for a variable measured in units of `√power`.
    pub fn in_units(&self, power: f64) -> Self {
        Self { a: self.a, b: self.b * power }
    }
}

/// Number of contiguous blocks each unknown vector is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSpec {
    pub s_f: usize,
    pub s_g: usize,
    pub s_h: usize,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self { s_f: 1, s_g: 8, s_h: 1 }
    }
}

impl PartitionSpec {
    pub fn unpartitioned() -> Self {
        Self { s_f: 1, s_g: 1, s_h: 1 }
    }
}

/// Split `0..len` into `s` equal contiguous ranges.
pub fn block_ranges(len: usize, s: usize) -> Result<Vec<Range<usize>>> {
    if s == 0 || len % s != 0 {
        return Err(config_err(format!("block count {s} does not divide length {len}")));
    }
    let w = len / s;
    Ok((0..s).map(|i| i * w..(i + 1) * w).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopRule {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { max_iters: 200, rel_tol: 1e-4 }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.rel_tol > 0.0) {
            return Err(config_err("stop rule needs max_iters >= 1 and rel_tol > 0"));
        }
        Ok(())
    }
}

/// Link estimates. Baselines only identify the cascaded and direct links.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub f_bar: Option<CMat>,
    pub g_bar: Option<CMat>,
    pub h_bar: CMat,
    /// `MN × K`, column `k` is `vec(Ĝ diag(f̂_k))`.
    pub cascaded: CMat,
}

impl EstimateSet {
    pub fn from_links(f_bar: CMat, g_bar: CMat, h_bar: CMat) -> Result<Self> {
        let cascaded = cascaded_channel(&f_bar, &g_bar)?;
        Ok(Self { f_bar: Some(f_bar), g_bar: Some(g_bar), h_bar, cascaded })
    }

    pub fn is_finite(&self) -> bool {
        let fin = |m: &CMat| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        fin(&self.h_bar)
            && fin(&self.cascaded)
            && self.f_bar.as_ref().is_none_or(fin)
            && self.g_bar.as_ref().is_none_or(fin)
    }
}

/// Mean-field posterior over one Gaussian vector with Gamma precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFactor {
    pub mean: CVec,
    /// Covariance of each contiguous block.
    pub cov: Vec<CMat>,
    pub blocks: Vec<Range<usize>>,
    /// Posterior means `⟨γ_i⟩`.
    pub gamma: DVector<f64>,
    /// Posterior Gamma rates `b̄_i`; the shape is `a + 1` for every entry.
    pub rate: DVector<f64>,
    /// Gamma hyperprior of every entry.
    pub hyper: HyperParams,
}

impl GaussianFactor {
    /// Prior-only factor: zero mean, `⟨γ⟩ = a/b`, covariance `⟨Γ⟩⁻¹`.
    pub fn prior(len: usize, blocks: Vec<Range<usize>>, hyper: &HyperParams) -> Self {
        let g0 = hyper.a / hyper.b;
        let cov = blocks.iter().map(|r| CMat::from_diagonal_element(r.len(), r.len(), C64::new(1.0 / g0, 0.0))).collect();
        Self {
            mean: CVec::zeros(len),
            cov,
            blocks,
            gamma: DVector::from_element(len, g0),
            rate: DVector::from_element(len, hyper.shape() / g0),
            hyper: *hyper,
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// `diag(C) + |m|²` entrywise.
    pub fn second_moment_diag(&self) -> DVector<f64> {
        let mut d = self.mean.map(|z| z.norm_sqr());
        for (r, c) in self.blocks.iter().zip(&self.cov) {
            for (j, i) in r.clone().enumerate() {
                d[i] += c[(j, j)].re;
            }
        }
        d
    }

    /// Full second moment `blockdiag(C) + m mᴴ`.
    pub fn second_moment(&self) -> CMat {
        let mut s = &self.mean * self.mean.adjoint();
        for (r, c) in self.blocks.iter().zip(&self.cov) {
            let mut view = s.view_mut((r.start, r.start), (r.len(), r.len()));
            view += c;
        }
        s
    }
}

/// Posterior over the pre-quantization sensor signal `u = vec(U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFactor {
    pub mean: CVec,
    /// Variance of the real part plus variance of the imaginary part.
    pub var: DVector<f64>,
    /// Differential entropy of the real and imaginary parts, summed.
    pub entropy: DVector<f64>,
    /// Entries where the narrow-interval expansion was used in the last update.
    pub approximate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub f: GaussianFactor,
    pub g: GaussianFactor,
    pub h: GaussianFactor,
    pub u: SensorFactor,
}

impl PosteriorState {
    /// Concatenated means `(m_f, m_g, m_h)`.
    pub fn concat_means(&self) -> CVec {
        let (a, b, c) = (&self.f.mean, &self.g.mean, &self.h.mean);
        CVec::from_iterator(a.len() + b.len() + c.len(), a.iter().chain(b.iter()).chain(c.iter()).copied())
    }

    pub fn estimates(&self, model: &Model) -> Result<EstimateSet> {
        let (f, g, h) = model.means_as_matrices(self);
        EstimateSet::from_links(&model.a_i * f, &model.a_b * g * model.a_i.adjoint(), &model.a_b * h)
    }
}

/// Observation model with every data-independent product precomputed.
#[derive(Debug, Clone)]
pub struct Model {
    pub a_b: CMat,
    pub a_i: CMat,
    pub x: CMat,
    pub s: CMat,
    pub omega: RMat,
    pub y: CMat,
    pub z_hat: CMat,
    pub z_lo: CMat,
    pub z_up: CMat,
    /// BS noise precision `1/σ_B²`; zero removes the BS branch.
    pub beta_b: f64,
    /// Sensor noise precision `1/σ_I²`.
    pub beta_i: f64,
    /// `A_Bᴴ A_B`.
    pub r: CMat,
    /// `P_kl = Σ_t x_kt* x_lt s_t* s_tᵀ`, stored at `k·K + l`.
    pub p_kl: Vec<CMat>,
    /// `A_fᴴ A_f` for the sensor branch.
    pub af_gram: CMat,
    /// `A_hᴴ A_h = (X* Xᵀ) ⊗ R`.
    pub ah_gram: CMat,
    /// Leading slots with the reflectors off.
    pub warmup_off: usize,
}

impl Model {
    pub fn new(dict: &SteeringDictionary, tp: &TrainingProtocol, meas: &MeasurementSet, noise: NoiseLevels) -> Result<Self> {
        let (m, n) = (dict.a_b.nrows(), dict.a_i.nrows());
        let t = tp.t();
        if tp.irs_elements() != n || meas.y.nrows() != m || meas.y.ncols() != t || meas.z_hat.shape() != (n, t) {
            return Err(dim_err("dictionary, protocol and measurements disagree"));
        }
        if !(noise.sigma_b2 > 0.0) || !(noise.sigma_i2 > 0.0) {
            return Err(config_err("noise variances must be positive"));
        }
        Ok(Self::assemble(
            dict.a_b.clone(),
            dict.a_i.clone(),
            tp.x.clone(),
            tp.s.clone(),
            tp.omega.clone(),
            [meas.y.clone(), meas.z_hat.clone(), meas.z_lo.clone(), meas.z_up.clone()],
            1.0 / noise.sigma_b2,
            1.0 / noise.sigma_i2,
            tp.warmup_off,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(a_b: CMat, a_i: CMat, x: CMat, s: CMat, omega: RMat, data: [CMat; 4], beta_b: f64, beta_i: f64, warmup_off: usize) -> Self {
        let (n, n_g) = (a_i.nrows(), a_i.ncols());
        let (k, t) = (x.nrows(), x.ncols());
        let r = a_b.adjoint() * &a_b;
        let s_conj = s.conjugate();
        let s_t = s.transpose();
        let mut p_kl = Vec::with_capacity(k * k);
        let mut af_gram = CMat::zeros(n_g * k, n_g * k);
        for kk in 0..k {
            for l in 0..k {
                let w: Vec<C64> = (0..t).map(|j| x[(kk, j)].conj() * x[(l, j)]).collect();
                let mut scaled = s_conj.clone();
                for (j, wj) in w.iter().enumerate() {
                    let mut col = scaled.column_mut(j);
                    col *= *wj;
                }
                p_kl.push(&scaled * &s_t);

                let d: Vec<C64> = (0..n).map(|i| (0..t).map(|j| w[j] * omega[(i, j)]).sum()).collect();
                let weighted = CMat::from_fn(n, n_g, |i, c| a_i[(i, c)] * d[i]);
                af_gram.view_mut((kk * n_g, l * n_g), (n_g, n_g)).copy_from(&(a_i.adjoint() * weighted));
            }
        }
        let ah_gram = kron(&(x.conjugate() * x.transpose()), &r);
        let [y, z_hat, z_lo, z_up] = data;
        Self { a_b, a_i, x, s, omega, y, z_hat, z_lo, z_up, beta_b, beta_i, r, p_kl, af_gram, ah_gram, warmup_off }
    }

    pub fn users(&self) -> usize {
        self.x.nrows()
    }

    pub fn slots(&self) -> usize {
        self.x.ncols()
    }

    pub fn m_g(&self) -> usize {
        self.a_b.ncols()
    }

    pub fn n_g(&self) -> usize {
        self.a_i.ncols()
    }

    pub fn len_f(&self) -> usize {
        self.n_g() * self.users()
    }

    pub fn len_g(&self) -> usize {
        self.m_g() * self.n_g()
    }

    pub fn len_h(&self) -> usize {
        self.m_g() * self.users()
    }

    pub fn sigma_i(&self) -> f64 {
        (1.0 / self.beta_i).sqrt()
    }

    /// Number of sensor observations (`Ω = 1` entries).
    pub fn active_count(&self) -> usize {
        self.omega.iter().filter(|&&w| w != 0.0).count()
    }

    pub(crate) fn means_as_matrices(&self, st: &PosteriorState) -> (CMat, CMat, CMat) {
        (
            reshape(&st.f.mean, self.n_g(), self.users()),
            reshape(&st.g.mean, self.m_g(), self.n_g()),
            reshape(&st.h.mean, self.m_g(), self.users()),
        )
    }

    /// `A_I F X` for a given angular `F`.
    pub(crate) fn irs_signal(&self, f: &CMat) -> CMat {
        &self.a_i * f * &self.x
    }

    /// `Ḡ (S ⊙ A_I F X)` with `Ḡ = A_B G A_Iᴴ`.
    pub(crate) fn cascaded_signal(&self, f: &CMat, g: &CMat) -> CMat {
        let reflected = self.s.component_mul(&self.irs_signal(f));
        &self.a_b * (g * (self.a_i.adjoint() * reflected))
    }

    /// Noise-free BS signal for the given angular channels.
    pub fn bs_signal(&self, f: &CMat, g: &CMat, h: &CMat) -> CMat {
        self.cascaded_signal(f, g) + &self.a_b * h * &self.x
    }

    /// Restrict to the first `w` slots.
    pub fn leading_slots(&self, w: usize) -> Self {
        let cols = |m: &CMat| m.columns(0, w).into_owned();
        Self::assemble(
            self.a_b.clone(),
            self.a_i.clone(),
            cols(&self.x),
            cols(&self.s),
            self.omega.columns(0, w).into_owned(),
            [cols(&self.y), cols(&self.z_hat), cols(&self.z_lo), cols(&self.z_up)],
            self.beta_b,
            self.beta_i,
            self.warmup_off.min(w),
        )
    }
}

#[cfg(test)]
mod tests;
