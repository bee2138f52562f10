//! Passive-only reference estimators on the cascaded sparse model.
//!
//! With `C_k = Ḡ diag(f̄_k) = A_B Θ_k A_Iᴴ` the BS observation is
//! `Y = A_B [Θ_1 … Θ_K H] W` where `W` stacks `A_Iᴴ S diag(X[k,:])` for every
//! user on top of `X`. Hence `vec(Y) = (Wᵀ ⊗ A_B) vec(Θ)`, and both solvers
//! below work on that Kronecker form without materialising it. Only `Y` is
//! consumed; sensor data is never touched.

use nalgebra::linalg::SymmetricEigen;

use crate::channel::{ChannelSet, SteeringDictionary};
use crate::error::{config_err, dim_err, Result};
use crate::estimator::EstimateSet;
use crate::linalg::{frobenius_sq, kron, right_pseudo_inverse, vectorize, CMat, CVec, C64};
use crate::measurement::TrainingProtocol;

/// `vec(Y) = (Wᵀ ⊗ A_B) vec(Θ)` with `Θ = [Θ_1 … Θ_K H]`.
#[derive(Debug, Clone)]
pub struct CascadedModel {
    pub a_b: CMat,
    pub a_i: CMat,
    /// `(K·N_g + K) × T` slot-mixing matrix.
    pub w: CMat,
    pub users: usize,
}

impl CascadedModel {
    pub fn m_g(&self) -> usize {
        self.a_b.ncols()
    }

    pub fn n_g(&self) -> usize {
        self.a_i.ncols()
    }

    /// Number of columns of `Θ`.
    pub fn width(&self) -> usize {
        self.w.nrows()
    }

    pub fn unknowns(&self) -> usize {
        self.m_g() * self.width()
    }

    pub fn rows(&self) -> usize {
        self.a_b.nrows() * self.w.ncols()
    }

    /// Label of column `c` of `Θ`: `(user, Some(IRS grid index))` or `(user, None)` for the direct link.
    pub fn column_label(&self, c: usize) -> (usize, Option<usize>) {
        let n_g = self.n_g();
        if c < self.users * n_g {
            (c / n_g, Some(c % n_g))
        } else {
            (c - self.users * n_g, None)
        }
    }

    pub fn apply(&self, theta: &CMat) -> CMat {
        &self.a_b * theta * &self.w
    }

    pub fn adjoint(&self, y: &CMat) -> CMat {
        self.a_b.adjoint() * y * self.w.adjoint()
    }

    /// The full sensing matrix; only for small instances.
    pub fn dense(&self) -> CMat {
        kron(&self.w.transpose(), &self.a_b)
    }

    /// Squared norm of every sensing column, laid out like `vec(Θ)`.
    pub fn column_norms_sq(&self) -> CMat {
        let a = self.a_b.column_iter().map(|c| c.norm_squared()).collect::<Vec<_>>();
        let w = self.w.row_iter().map(|r| r.norm_squared()).collect::<Vec<_>>();
        CMat::from_fn(self.m_g(), self.width(), |m, c| C64::new(a[m] * w[c], 0.0))
    }

    /// Sensing column of `vec(Θ)` index `idx`.
    fn column(&self, idx: usize) -> CVec {
        let (m, c) = (idx % self.m_g(), idx / self.m_g());
        let a = self.a_b.column(m);
        let w = self.w.row(c);
        vectorize(&(a * w))
    }

    /// Split `Θ` into a per-user cascaded estimate and the direct link.
    pub fn estimates(&self, theta: &CMat) -> EstimateSet {
        let (k, n_g) = (self.users, self.n_g());
        let (m, n) = (self.a_b.nrows(), self.a_i.nrows());
        let mut cascaded = CMat::zeros(m * n, k);
        for u in 0..k {
            let c = &self.a_b * theta.columns(u * n_g, n_g) * self.a_i.adjoint();
            cascaded.column_mut(u).copy_from(&vectorize(&c));
        }
        let h_bar = &self.a_b * theta.columns(k * n_g, k);
        EstimateSet { f_bar: None, g_bar: None, h_bar, cascaded }
    }

    /// Angular coordinates reproducing the true links through the dictionaries.
    pub fn angular_truth(&self, ch: &ChannelSet) -> Result<CMat> {
        let (m, n) = (self.a_b.nrows(), self.a_i.nrows());
        if ch.g_bar.shape() != (m, n) || ch.users() != self.users {
            return Err(dim_err("channel set does not match the cascaded model"));
        }
        let pb = right_pseudo_inverse(&self.a_b)?;
        let pi = right_pseudo_inverse(&self.a_i)?.adjoint();
        let cascaded = ch.cascaded();
        let n_g = self.n_g();
        let mut theta = CMat::zeros(self.m_g(), self.width());
        for u in 0..self.users {
            let c = CMat::from_column_slice(m, n, cascaded.column(u).as_slice());
            theta.columns_mut(u * n_g, n_g).copy_from(&(&pb * c * &pi));
        }
        theta.columns_mut(self.users * n_g, self.users).copy_from(&(&pb * &ch.h_bar));
        Ok(theta)
    }
}

pub fn build_cascaded_model(tp: &TrainingProtocol, dict: &SteeringDictionary) -> Result<CascadedModel> {
    let (k, t, n_g) = (tp.users(), tp.t(), dict.n_g());
    if tp.irs_elements() != dict.a_i.nrows() {
        return Err(dim_err("protocol and IRS dictionary disagree on N"));
    }
    let mix = dict.a_i.adjoint() * &tp.s;
    let mut w = CMat::zeros(k * n_g + k, t);
    for u in 0..k {
        for j in 0..t {
            let col = mix.column(j) * tp.x[(u, j)];
            w.view_mut((u * n_g, j), (n_g, 1)).copy_from(&col);
        }
    }
    w.rows_mut(k * n_g, k).copy_from(&tp.x);
    Ok(CascadedModel { a_b: dict.a_b.clone(), a_i: dict.a_i.clone(), w, users: k })
}

/// Default OMP support budget: the number of cascaded and direct paths,
/// capped at half the number of observations and at the dictionary size.
pub fn omp_budget(users: usize, paths_ib: usize, paths_ui: usize, paths_ub: usize, model: &CascadedModel) -> usize {
    (users * ((paths_ib + 1) * (paths_ui + 1) + paths_ub + 1)).min(model.rows() / 2).min(model.unknowns()).max(1)
}

/// Orthogonal matching pursuit on normalised correlations, lowest index on ties.
pub fn omp_estimate(y: &CMat, model: &CascadedModel, budget: usize) -> Result<EstimateSet> {
    Ok(model.estimates(&omp_theta(y, model, budget)?))
}

/// OMP coefficients `Θ`.
pub fn omp_theta(y: &CMat, model: &CascadedModel, budget: usize) -> Result<CMat> {
    let cols = model.unknowns();
    if budget == 0 || budget > cols {
        return Err(config_err(format!("OMP budget {budget} outside 1..={cols}")));
    }
    if y.shape() != (model.a_b.nrows(), model.w.ncols()) {
        return Err(dim_err("observation shape does not match the cascaded model"));
    }
    let norms = model.column_norms_sq();
    let yv = vectorize(y);
    let y_norm = yv.norm();
    let mut resid = yv.clone();
    let mut basis: Vec<CVec> = Vec::new();
    let mut r_upper: Vec<CVec> = Vec::new();
    let mut support: Vec<usize> = Vec::new();
    let mut excluded = vec![false; cols];

    while support.len() < budget && resid.norm() > 1e-12 * y_norm {
        let corr = model.adjoint(&CMat::from_column_slice(y.nrows(), y.ncols(), resid.as_slice()));
        let mut best: Option<(usize, f64)> = None;
        for (idx, (c, nn)) in corr.iter().zip(norms.iter()).enumerate() {
            if excluded[idx] || nn.re <= 0.0 {
                continue;
            }
            let score = c.norm_sqr() / nn.re;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((idx, score));
            }
        }
        let Some((idx, _)) = best else { break };
        excluded[idx] = true;

        let phi = model.column(idx);
        let mut q = phi.clone();
        let mut coeffs = CVec::zeros(basis.len() + 1);
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let p = b.dotc(&q);
                coeffs[i] += p;
                q -= b * p;
            }
        }
        let qn = q.norm();
        if qn <= 1e-10 * phi.norm() {
            continue;
        }
        q /= C64::new(qn, 0.0);
        coeffs[basis.len()] = C64::new(qn, 0.0);
        let p = q.dotc(&resid);
        resid -= &q * p;
        basis.push(q);
        r_upper.push(coeffs);
        support.push(idx);
    }

    let s = support.len();
    let mut theta = CMat::zeros(model.m_g(), model.width());
    if s == 0 {
        return Ok(theta);
    }
    let r = CMat::from_fn(s, s, |i, j| if i < r_upper[j].len() { r_upper[j][i] } else { C64::new(0.0, 0.0) });
    let rhs = CVec::from_fn(s, |i, _| basis[i].dotc(&yv));
    let coef = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| crate::Error::NotPositiveDefinite("singular OMP refit".into()))?;
    for (idx, c) in support.iter().zip(coef.iter()) {
        theta[*idx] = *c;
    }
    Ok(theta)
}

/// Ridge weight `σ_B² / (‖y‖² / ‖Φ‖_F²)`: noise power over the per-coefficient
/// signal power implied by the data.
pub fn default_ridge(y: &CMat, model: &CascadedModel, sigma_b2: f64) -> f64 {
    let phi_fro: f64 = model.column_norms_sq().iter().map(|z| z.re).sum();
    let energy = frobenius_sq(y);
    if energy == 0.0 || phi_fro == 0.0 {
        return sigma_b2;
    }
    sigma_b2 * phi_fro / energy
}

/// Regularised least squares `argmin ‖y − Φθ‖² + ridge‖θ‖²`, solved in the
/// eigenbases of `R = A_BᴴA_B` and `W* Wᵀ`. With `ridge = 0` the minimum-norm
/// solution is returned.
pub fn ls_theta(y: &CMat, model: &CascadedModel, ridge: f64) -> Result<CMat> {
    if !(ridge >= 0.0) {
        return Err(config_err(format!("ridge must be non-negative, got {ridge}")));
    }
    if y.shape() != (model.a_b.nrows(), model.w.ncols()) {
        return Err(dim_err("observation shape does not match the cascaded model"));
    }
    let er = SymmetricEigen::new(model.a_b.adjoint() * &model.a_b);
    let ew = SymmetricEigen::new(&model.w * model.w.adjoint());
    let rhs = model.adjoint(y);
    let rot = er.eigenvectors.adjoint() * rhs * &ew.eigenvectors;
    let scale = er.eigenvalues.max() * ew.eigenvalues.max();
    let cutoff = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let sol = CMat::from_fn(rot.nrows(), rot.ncols(), |i, j| {
        let d = er.eigenvalues[i] * ew.eigenvalues[j] + ridge;
        if d > cutoff {
            rot[(i, j)] / d
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(&er.eigenvectors * sol * ew.eigenvectors.adjoint())
}

pub fn ls_estimate(y: &CMat, model: &CascadedModel, ridge: f64) -> Result<EstimateSet> {
    Ok(model.estimates(&ls_theta(y, model, ridge)?))
}
