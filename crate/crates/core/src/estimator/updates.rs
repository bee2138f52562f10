//! Mean-field coordinate updates.
//!
//! Gaussian factors are updated block by block (Gauss-Seidel over contiguous
//! ranges): block `i` gets covariance `Λ_ii⁻¹` and mean
//! `Λ_ii⁻¹ (r_i − Σ_{j≠i} Λ_ij m_j)` using the latest means of other blocks.

use std::f64::consts::SQRT_2;
use std::ops::Range;

use nalgebra::DVector;

use super::expectations::{expect_afg_gram, expect_agf_gram, KronGram};
use super::truncnorm::trunc_gauss_moments;
use super::{GaussianFactor, Model, PosteriorState};
use crate::error::Result;
use crate::linalg::{hpd_inverse, CMat, CVec, C64};

/// Row-block access to a precision matrix `Λ`.
pub(crate) trait Precision {
    fn block(&self, r: &Range<usize>) -> CMat;
    /// Rows `r` of `Λ m`.
    fn rows_mul(&self, r: &Range<usize>, m: &CVec) -> CVec;
}

pub(crate) struct Dense<'a>(pub &'a CMat);

impl Precision for Dense<'_> {
    fn block(&self, r: &Range<usize>) -> CMat {
        self.0.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    fn rows_mul(&self, r: &Range<usize>, m: &CVec) -> CVec {
        self.0.rows(r.start, r.len()) * m
    }
}

/// `β (K1 ⊗ R) + diag(γ)`.
pub(crate) struct Kron<'a> {
    pub gram: &'a KronGram,
    pub beta: f64,
    pub gamma: &'a DVector<f64>,
}

impl Precision for Kron<'_> {
    fn block(&self, r: &Range<usize>) -> CMat {
        let mut b = self.gram.block(r) * C64::new(self.beta, 0.0);
        for (j, i) in r.clone().enumerate() {
            b[(j, j)] += self.gamma[i];
        }
        b
    }

    fn rows_mul(&self, r: &Range<usize>, m: &CVec) -> CVec {
        let full = self.gram.mul_vec(m);
        CVec::from_fn(r.len(), |j, _| full[r.start + j] * self.beta + m[r.start + j] * self.gamma[r.start + j])
    }
}

pub(crate) fn block_solve(op: &impl Precision, rhs: &CVec, factor: &mut GaussianFactor) -> Result<()> {
    for bi in 0..factor.blocks.len() {
        let r = factor.blocks[bi].clone();
        let lam = op.block(&r);
        let m_r = factor.mean.rows(r.start, r.len()).into_owned();
        let local = rhs.rows(r.start, r.len()) - op.rows_mul(&r, &factor.mean) + &lam * &m_r;
        let (cov, _) = hpd_inverse(&lam)?;
        let new_mean = &cov * local;
        factor.mean.rows_mut(r.start, r.len()).copy_from(&new_mean);
        factor.cov[bi] = cov;
    }
    Ok(())
}

fn add_diag(mut a: CMat, d: &DVector<f64>) -> CMat {
    for i in 0..d.len() {
        a[(i, i)] += d[i];
    }
    a
}

fn vec_of(a: CMat) -> CVec {
    CVec::from_column_slice(a.as_slice())
}

/// `Y − A_B H_m X`.
fn direct_residual(model: &Model, h: &CMat) -> CMat {
    &model.y - &model.a_b * h * &model.x
}

/// Part of the `f` system that does not depend on `q(u)` or `γ_f`.
pub(crate) struct FBase {
    /// `β_B ⟨A_fgᴴ A_fg⟩` (zero without the BS branch).
    bs_lam: CMat,
    rhs: CVec,
}

impl FBase {
    pub(crate) fn new(model: &Model, st: &PosteriorState) -> Self {
        let len = model.len_f();
        let mut bs_lam = CMat::zeros(len, len);
        let mut rhs = CVec::zeros(len);
        if model.beta_b > 0.0 {
            let (_, g, h) = model.means_as_matrices(st);
            bs_lam = expect_afg_gram(model, &st.g) * C64::new(model.beta_b, 0.0);
            let back = &model.a_i * g.adjoint() * model.a_b.adjoint() * direct_residual(model, &h);
            let weighted = model.s.conjugate().component_mul(&back);
            rhs = vec_of(model.a_i.adjoint() * (weighted * model.x.adjoint())) * C64::new(model.beta_b, 0.0);
        }
        Self { bs_lam, rhs }
    }

    /// BS and prior part of the `f` system: `(β_B ⟨A_fgᴴ A_fg⟩ + diag γ_f, r_B)`.
    pub(crate) fn quadratic(&self, _model: &Model, st: &PosteriorState) -> (CMat, CVec) {
        (add_diag(self.bs_lam.clone(), &st.f.gamma), self.rhs.clone())
    }

    /// Full precision and right-hand side for the current `q(u)` and `γ_f`.
    pub(crate) fn system(&self, model: &Model, st: &PosteriorState) -> (CMat, CVec) {
        let (n, t) = (model.a_i.nrows(), model.slots());
        let masked = CMat::from_fn(n, t, |i, j| st.u.mean[i + n * j] * model.omega[(i, j)]);
        let sensor = vec_of(model.a_i.adjoint() * (masked * model.x.adjoint())) * C64::new(model.beta_i, 0.0);
        let lam = add_diag(&self.bs_lam + &model.af_gram * C64::new(model.beta_i, 0.0), &st.f.gamma);
        (lam, &self.rhs + sensor)
    }

    pub(crate) fn update(&self, model: &Model, st: &mut PosteriorState) -> Result<()> {
        let (lam, rhs) = self.system(model, st);
        block_solve(&Dense(&lam), &rhs, &mut st.f)
    }
}

/// `Λ_ii⁻¹` for each block range.
pub(crate) fn block_covariances(lam: &CMat, blocks: &[Range<usize>]) -> Result<Vec<CMat>> {
    blocks.iter().map(|r| Ok(hpd_inverse(&Dense(lam).block(r))?.0)).collect()
}

/// Block update of the UE-IRS factor.
pub fn update_f_blocks(model: &Model, st: &mut PosteriorState) -> Result<()> {
    FBase::new(model, st).update(model, st)
}

/// Factored precision and right-hand side of the `g` factor.
pub(crate) fn g_system(model: &Model, st: &PosteriorState) -> (KronGram, CVec) {
    let (f, _, h) = model.means_as_matrices(st);
    let gram = expect_agf_gram(model, &st.f);
    let p = model.a_i.adjoint() * model.s.component_mul(&model.irs_signal(&f));
    let rhs = vec_of(model.a_b.adjoint() * direct_residual(model, &h) * p.adjoint()) * C64::new(model.beta_b, 0.0);
    (gram, rhs)
}

/// Block update of the IRS-BS factor.
pub fn update_g_blocks(model: &Model, st: &mut PosteriorState) -> Result<()> {
    let (gram, rhs) = g_system(model, st);
    let gamma = st.g.gamma.clone();
    block_solve(&Kron { gram: &gram, beta: model.beta_b, gamma: &gamma }, &rhs, &mut st.g)
}

pub(crate) fn h_system(model: &Model, st: &PosteriorState) -> (CMat, CVec) {
    let (f, g, _) = model.means_as_matrices(st);
    let resid = &model.y - model.cascaded_signal(&f, &g);
    let rhs = vec_of(model.a_b.adjoint() * resid * model.x.adjoint()) * C64::new(model.beta_b, 0.0);
    let lam = add_diag(&model.ah_gram * C64::new(model.beta_b, 0.0), &st.h.gamma);
    (lam, rhs)
}

/// Block update of the UE-BS factor.
pub fn update_h_blocks(model: &Model, st: &mut PosteriorState) -> Result<()> {
    let (lam, rhs) = h_system(model, st);
    block_solve(&Dense(&lam), &rhs, &mut st.h)
}

/// `⟨γ_i⟩ = (a + 1)/(b + ⟨|x_i|²⟩)` for one factor.
pub fn update_gamma(factor: &mut GaussianFactor) {
    let hyper = factor.hyper;
    let d = factor.second_moment_diag();
    factor.rate = d.map(|v| hyper.b + v);
    factor.gamma = factor.rate.map(|r| hyper.shape() / r);
}

/// Precision updates of all three factors.
pub fn update_gammas(st: &mut PosteriorState) {
    update_gamma(&mut st.f);
    update_gamma(&mut st.g);
    update_gamma(&mut st.h);
}

/// Truncated-Gaussian update of the pre-quantization sensor signal.
pub fn update_u(model: &Model, st: &mut PosteriorState) {
    update_u_entries(model, st, false);
}

/// As [`update_u`], skipping entries with `Ω = 0`. Their moments do not
/// depend on `f`, so this is exact once [`update_u`] has run on the state.
pub fn update_u_active(model: &Model, st: &mut PosteriorState) {
    update_u_entries(model, st, true);
}

fn update_u_entries(model: &Model, st: &mut PosteriorState, active_only: bool) {
    let (f, _, _) = model.means_as_matrices(st);
    let b = model.irs_signal(&f);
    let sigma = model.sigma_i() / SQRT_2;
    let (n, t) = (model.a_i.nrows(), model.slots());
    let mut approximate = 0;
    for j in 0..t {
        for i in 0..n {
            if active_only && model.omega[(i, j)] == 0.0 {
                continue;
            }
            let idx = i + n * j;
            let mu = b[(i, j)] * model.omega[(i, j)];
            let (lo, up) = (model.z_lo[(i, j)], model.z_up[(i, j)]);
            let re = trunc_gauss_moments(mu.re, sigma, lo.re, up.re);
            let im = trunc_gauss_moments(mu.im, sigma, lo.im, up.im);
            approximate += re.approximate as usize + im.approximate as usize;
            st.u.mean[idx] = C64::new(re.mean, im.mean);
            st.u.var[idx] = re.var + im.var;
            st.u.entropy[idx] = re.entropy + im.entropy;
        }
    }
    st.u.approximate = approximate;
}
