//! Variational free energy `E_q[ln q] − E_q[ln p]`.
//!
//! Sensor entries with `Ω = 0` carry no information about the channels and
//! contribute a constant, so they are left out; this also keeps the value
//! independent of how their pseudo-thresholds were assigned.

use std::f64::consts::{E, PI};

use super::expectations::{afg_gram_covariance, expect_afg_gram};
use super::{GaussianFactor, Model, PosteriorState};
use crate::error::Result;
use crate::linalg::{frobenius_sq, hpd_cholesky, CMat, CVec};

/// Digamma function for `x > 0`.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    acc + x.ln() - 0.5 * inv - series
}

/// `Σ_i tr(A[r_i, r_i] C_i)` over the blocks of a factor.
fn block_trace(a: &CMat, factor: &GaussianFactor) -> f64 {
    factor
        .blocks
        .iter()
        .zip(&factor.cov)
        .map(|(r, c)| (a.view((r.start, r.start), (r.len(), r.len())) * c).trace().re)
        .sum()
}

fn logdet(c: &CMat) -> Result<f64> {
    let (ch, _) = hpd_cholesky(c)?;
    Ok(2.0 * ch.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>())
}

/// `KL(q(γ) ‖ p(γ))` summed over the entries of a factor.
pub fn gamma_kl(factor: &GaussianFactor) -> f64 {
    let hyper = &factor.hyper;
    let shape = hyper.shape();
    let psi = digamma(shape);
    let (lg_a, lg_shape) = (libm::lgamma(hyper.a), libm::lgamma(shape));
    factor
        .rate
        .iter()
        .map(|&rate| {
            let e_ln = psi - rate.ln();
            let e_g = shape / rate;
            let neg_log_prior = -hyper.a * hyper.b.ln() + lg_a - (hyper.a - 1.0) * e_ln + hyper.b * e_g;
            let entropy = shape - rate.ln() + lg_shape + (1.0 - shape) * psi;
            neg_log_prior - entropy
        })
        .sum()
}

/// `−E ln p(x | γ) − H(q(x))` for one Gaussian factor.
fn gaussian_terms(factor: &GaussianFactor) -> Result<f64> {
    let hyper = &factor.hyper;
    let psi = digamma(hyper.shape());
    let d = factor.second_moment_diag();
    let mut total = 0.0;
    for i in 0..factor.len() {
        let rate = factor.rate[i];
        total += PI.ln() - (psi - rate.ln()) + hyper.shape() / rate * d[i];
    }
    for c in &factor.cov {
        total -= c.nrows() as f64 * (PI * E).ln() + logdet(c)?;
    }
    Ok(total)
}

/// Free energy of the current state (constants of inactive sensor entries dropped).
pub fn free_energy(model: &Model, st: &PosteriorState) -> Result<f64> {
    let (f, g, h) = model.means_as_matrices(st);
    let mut total = 0.0;

    if model.beta_b > 0.0 {
        let casc = model.cascaded_signal(&f, &g);
        let resid = &model.y - &casc - &model.a_b * &h * &model.x;
        let gram = expect_afg_gram(model, &st.g);
        let gram_cov = afg_gram_covariance(model, &st.g);
        let mf: &CVec = &st.f.mean;
        let var_casc = block_trace(&gram, &st.f) + (mf.adjoint() * &gram_cov * mf)[(0, 0)].re;
        let var_direct = block_trace(&model.ah_gram, &st.h);
        let count = (model.y.nrows() * model.y.ncols()) as f64;
        total += count * (PI / model.beta_b).ln() + model.beta_b * (frobenius_sq(&resid) + var_casc + var_direct);
    }

    let active = model.active_count();
    if active > 0 {
        let b = model.irs_signal(&f);
        let n = model.a_i.nrows();
        let mut sq = 0.0;
        let mut ent = 0.0;
        for (idx, w) in model.omega.iter().enumerate() {
            if *w != 0.0 {
                let (i, j) = (idx % n, idx / n);
                sq += (st.u.mean[idx] - b[(i, j)]).norm_sqr() + st.u.var[idx];
                ent += st.u.entropy[idx];
            }
        }
        sq += block_trace(&model.af_gram, &st.f);
        total += active as f64 * (PI / model.beta_i).ln() + model.beta_i * sq - ent;
    }

    for factor in [&st.f, &st.g, &st.h] {
        total += gaussian_terms(factor)? + gamma_kl(factor);
    }
    Ok(total)
}
