//! Dense reference implementations used to cross-check the structured code.
//!
//! Everything here materialises the `MT`- and `NT`-row sensing matrices and
//! is only practical for tiny dimensions.

use crate::estimator::{GaussianFactor, Model, PosteriorState};
use crate::linalg::{hpd_inverse, kron, reshape, vectorize, CMat, CVec, C64};

fn unit(len: usize, j: usize) -> CVec {
    let mut v = CVec::zeros(len);
    v[j] = C64::new(1.0, 0.0);
    v
}

/// `A_fg(g)`: maps `f` to `vec(Ḡ(S ⊙ A_I F X))`.
pub fn dense_afg(model: &Model, g: &CVec) -> CMat {
    let gm = reshape(g, model.m_g(), model.n_g());
    let len = model.len_f();
    let cols: Vec<CVec> = (0..len)
        .map(|j| vectorize(&model.cascaded_signal(&reshape(&unit(len, j), model.n_g(), model.users()), &gm)))
        .collect();
    CMat::from_columns(&cols)
}

/// `A_gf(f)`: maps `g` to the same signal for fixed `f`.
pub fn dense_agf(model: &Model, f: &CVec) -> CMat {
    let fm = reshape(f, model.n_g(), model.users());
    let len = model.len_g();
    let cols: Vec<CVec> = (0..len)
        .map(|j| vectorize(&model.cascaded_signal(&fm, &reshape(&unit(len, j), model.m_g(), model.n_g()))))
        .collect();
    CMat::from_columns(&cols)
}

/// `A_f`: maps `f` to `vec(Ω ⊙ A_I F X)`.
pub fn dense_af(model: &Model) -> CMat {
    let len = model.len_f();
    let cols: Vec<CVec> = (0..len)
        .map(|j| {
            let s = model.irs_signal(&reshape(&unit(len, j), model.n_g(), model.users()));
            vectorize(&CMat::from_fn(s.nrows(), s.ncols(), |r, c| s[(r, c)] * model.omega[(r, c)]))
        })
        .collect();
    CMat::from_columns(&cols)
}

/// `A_h = Xᵀ ⊗ A_B`.
pub fn dense_ah(model: &Model) -> CMat {
    kron(&model.x.transpose(), &model.a_b)
}

/// `Σ_ij E[x_j x_i*] B_iᴴ B_j` for `B(x) = Σ_j x_j B_j`.
fn expected_gram(basis: &[CMat], second: &CMat) -> CMat {
    let n = basis[0].ncols();
    let mut out = CMat::zeros(n, n);
    for (i, bi) in basis.iter().enumerate() {
        let bih = bi.adjoint();
        for (j, bj) in basis.iter().enumerate() {
            let w = second[(j, i)];
            if w != C64::new(0.0, 0.0) {
                out += &bih * bj * w;
            }
        }
    }
    out
}

/// Exhaustive second-moment contraction for `⟨A_fgᴴ A_fg⟩`.
pub fn brute_expect_afg(model: &Model, g: &GaussianFactor) -> CMat {
    let len = model.len_g();
    let basis: Vec<CMat> = (0..len).map(|j| dense_afg(model, &unit(len, j))).collect();
    expected_gram(&basis, &g.second_moment())
}

/// Exhaustive second-moment contraction for `⟨A_gfᴴ A_gf⟩`.
pub fn brute_expect_agf(model: &Model, f: &GaussianFactor) -> CMat {
    let len = model.len_f();
    let basis: Vec<CMat> = (0..len).map(|j| dense_agf(model, &unit(len, j))).collect();
    expected_gram(&basis, &f.second_moment())
}

fn re(s: f64) -> C64 {
    C64::new(s, 0.0)
}

fn with_prior(mut lam: CMat, gamma: &nalgebra::DVector<f64>) -> CMat {
    for i in 0..gamma.len() {
        lam[(i, i)] += gamma[i];
    }
    lam
}

/// Unpartitioned update of `f` from the dense model: `(mean, covariance)`.
pub fn full_f_update(model: &Model, st: &PosteriorState) -> (CVec, CMat) {
    let y = vectorize(&model.y);
    let af = dense_af(model);
    let ah = dense_ah(model);
    let masked: CVec = {
        let mask = vectorize(&crate::linalg::to_complex(&model.omega));
        st.u.mean.component_mul(&mask)
    };
    let mut lam = af.adjoint() * &af * re(model.beta_i);
    let mut rhs = af.adjoint() * masked * re(model.beta_i);
    if model.beta_b > 0.0 {
        lam += brute_expect_afg(model, &st.g) * re(model.beta_b);
        let afg = dense_afg(model, &st.g.mean);
        rhs += afg.adjoint() * (y - ah * &st.h.mean) * re(model.beta_b);
    }
    let (cov, _) = hpd_inverse(&with_prior(lam, &st.f.gamma)).expect("positive definite");
    (&cov * rhs, cov)
}

/// Unpartitioned update of `g`.
pub fn full_g_update(model: &Model, st: &PosteriorState) -> (CVec, CMat) {
    let y = vectorize(&model.y);
    let ah = dense_ah(model);
    let agf = dense_agf(model, &st.f.mean);
    let lam = brute_expect_agf(model, &st.f) * re(model.beta_b);
    let rhs = agf.adjoint() * (y - ah * &st.h.mean) * re(model.beta_b);
    let (cov, _) = hpd_inverse(&with_prior(lam, &st.g.gamma)).expect("positive definite");
    (&cov * rhs, cov)
}

/// Unpartitioned update of `h`.
pub fn full_h_update(model: &Model, st: &PosteriorState) -> (CVec, CMat) {
    let y = vectorize(&model.y);
    let ah = dense_ah(model);
    let afg = dense_afg(model, &st.g.mean);
    let lam = ah.adjoint() * &ah * re(model.beta_b);
    let rhs = ah.adjoint() * (y - afg * &st.f.mean) * re(model.beta_b);
    let (cov, _) = hpd_inverse(&with_prior(lam, &st.h.gamma)).expect("positive definite");
    (&cov * rhs, cov)
}

/// Random posterior state with unit-scale moments, for oracle comparisons.
pub fn random_state<R: rand::Rng + ?Sized>(
    rng: &mut R,
    model: &Model,
    partition: &crate::estimator::PartitionSpec,
    hyper: &crate::estimator::HyperParams,
) -> crate::error::Result<PosteriorState> {
    use crate::channel::complex_normal;
    use crate::estimator::{block_ranges, SensorFactor};
    use nalgebra::DVector;

    let mut factor = |len: usize, s: usize| -> crate::error::Result<GaussianFactor> {
        let mut fac = GaussianFactor::prior(len, block_ranges(len, s)?, hyper);
        fac.mean = CVec::from_fn(len, |_, _| complex_normal(rng, 1.0));
        for c in fac.cov.iter_mut() {
            let n = c.nrows();
            let b = CMat::from_fn(n, n, |_, _| complex_normal(rng, 1.0 / n as f64));
            *c = &b * b.adjoint() + CMat::identity(n, n) * C64::new(0.1, 0.0);
        }
        fac.gamma = DVector::from_fn(len, |_, _| rng.random_range(0.5..2.0));
        fac.rate = fac.gamma.map(|g| hyper.shape() / g);
        Ok(fac)
    };
    let f = factor(model.len_f(), partition.s_f)?;
    let g = factor(model.len_g(), partition.s_g)?;
    let h = factor(model.len_h(), partition.s_h)?;
    let n_entries = model.a_i.nrows() * model.slots();
    let mut st = PosteriorState {
        f,
        g,
        h,
        u: SensorFactor {
            mean: CVec::zeros(n_entries),
            var: DVector::zeros(n_entries),
            entropy: DVector::zeros(n_entries),
            approximate: 0,
        },
    };
    crate::estimator::update_u(model, &mut st);
    Ok(st)
}
