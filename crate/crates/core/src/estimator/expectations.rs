//! Posterior expectations of the bilinear sensing Grams.
//!
//! `A_fg(g)` maps `f` to the reflected part of `vec(Y)` for fixed `g`, and
//! `A_gf(f)` maps `g` to the same signal for fixed `f`. Both expectations are
//! assembled per user pair from `P_kl` without forming any `MT`-row matrix.

use std::ops::Range;

use super::{GaussianFactor, Model};
use crate::linalg::{kron, CMat, CVec};

/// `⟨Gᴴ R G⟩` from the moments of `g`; `with_mean = false` keeps only the
/// covariance contribution.
fn expect_g_quadratic(model: &Model, g: &GaussianFactor, with_mean: bool) -> CMat {
    let (m_g, n_g) = (model.m_g(), model.n_g());
    let r = &model.r;
    let mut m2 = if with_mean {
        let gm = CMat::from_column_slice(m_g, n_g, g.mean.as_slice());
        gm.adjoint() * r * gm
    } else {
        CMat::zeros(n_g, n_g)
    };
    // Σ_{m,m'} R[m,m'] C[m'+M_g·b, m+M_g·a] accumulated into entry (a, b).
    for (range, c) in g.blocks.iter().zip(&g.cov) {
        for (qi, q) in range.clone().enumerate() {
            let (a, m) = (q / m_g, q % m_g);
            for (pi, p) in range.clone().enumerate() {
                let (b, mp) = (p / m_g, p % m_g);
                m2[(a, b)] += r[(m, mp)] * c[(pi, qi)];
            }
        }
    }
    m2
}

fn afg_gram_from_quadratic(model: &Model, m2: &CMat) -> CMat {
    let (k, n_g) = (model.users(), model.n_g());
    let a_i = &model.a_i;
    let q = a_i * m2 * a_i.adjoint();
    let mut out = CMat::zeros(n_g * k, n_g * k);
    for kk in 0..k {
        for l in 0..k {
            let block = a_i.adjoint() * q.component_mul(&model.p_kl[kk * k + l]) * a_i;
            out.view_mut((kk * n_g, l * n_g), (n_g, n_g)).copy_from(&block);
        }
    }
    out
}

/// `⟨A_fgᴴ A_fg⟩` under the current posterior of `g`, an `N_g K` square
/// Hermitian matrix whose `(k, l)` block is `A_Iᴴ (Q ⊙ P_kl) A_I` with
/// `Q = A_I ⟨Gᴴ A_Bᴴ A_B G⟩ A_Iᴴ`.
pub fn expect_afg_gram(model: &Model, g: &GaussianFactor) -> CMat {
    afg_gram_from_quadratic(model, &expect_g_quadratic(model, g, true))
}

/// Covariance-only part of [`expect_afg_gram`].
pub(crate) fn afg_gram_covariance(model: &Model, g: &GaussianFactor) -> CMat {
    afg_gram_from_quadratic(model, &expect_g_quadratic(model, g, false))
}

/// `K1 ⊗ R`, kept factored.
#[derive(Debug, Clone, PartialEq)]
pub struct KronGram {
    pub k1: CMat,
    pub r: CMat,
}

impl KronGram {
    pub fn dim(&self) -> usize {
        self.k1.nrows() * self.r.nrows()
    }

    pub fn entry(&self, p: usize, q: usize) -> crate::linalg::C64 {
        let m = self.r.nrows();
        self.k1[(p / m, q / m)] * self.r[(p % m, q % m)]
    }

    pub fn block(&self, range: &Range<usize>) -> CMat {
        CMat::from_fn(range.len(), range.len(), |i, j| self.entry(range.start + i, range.start + j))
    }

    /// `(K1 ⊗ R) vec(V) = vec(R V K1ᵀ)`.
    pub fn mul_vec(&self, v: &CVec) -> CVec {
        let m = self.r.nrows();
        let vm = CMat::from_column_slice(m, self.k1.nrows(), v.as_slice());
        let out = &self.r * vm * self.k1.transpose();
        CVec::from_column_slice(out.as_slice())
    }

    pub fn dense(&self) -> CMat {
        kron(&self.k1, &self.r)
    }
}

/// `⟨A_gfᴴ A_gf⟩ = K1 ⊗ A_Bᴴ A_B` under the current posterior of `f`, with
/// `K1 = conj(A_Iᴴ E A_I)` and `E = Σ_kl (A_I ⟨f_k f_lᴴ⟩ A_Iᴴ) ⊙ conj(P_kl)`.
pub fn expect_agf_gram(model: &Model, f: &GaussianFactor) -> KronGram {
    let (k, n_g) = (model.users(), model.n_g());
    let n = model.a_i.nrows();
    let a_i = &model.a_i;
    let sf = f.second_moment();
    let mut e = CMat::zeros(n, n);
    for kk in 0..k {
        for l in 0..k {
            let skl = sf.view((kk * n_g, l * n_g), (n_g, n_g));
            let spatial = a_i * skl * a_i.adjoint();
            e += spatial.component_mul(&model.p_kl[kk * k + l].conjugate());
        }
    }
    let k1 = (a_i.adjoint() * e * a_i).conjugate();
    KronGram { k1, r: model.r.clone() }
}
