//! Joint update of `q(f)` and `q(u)` with `q(g)`, `q(h)` and `γ_f` fixed.
//!
//! For a fixed `m_f` the optimal `q(u)` is the truncated Gaussian of
//! [`update_u`](super::update_u), and the free energy collapses to
//!
//! ```text
//! J(m) = mᴴ P m − 2 Re(mᴴ r) − Σ ln Z_e(a_e m)
//! ```
//!
//! over the active sensor entries `e`, with `Z_e` the probability mass of the
//! quantization cell of entry `e` around `a_e m`. `J` is convex, and its
//! stationary point is the fixed point of alternating the `f` and `u`
//! updates, which is very slow to reach by alternation when the sensor noise
//! is small next to the quantization step. It is minimised here by damped
//! Newton steps in the real coordinates `(Re m, Im m)`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};

use super::truncnorm::trunc_gauss_moments;
use super::updates::{block_covariances, FBase};
use super::{Model, PosteriorState};
use crate::error::Result;
use crate::linalg::{CMat, CVec, C64};

type RMat = DMatrix<f64>;
type RVec = DVector<f64>;

/// Real gradient rows of `Re b_e` and `Im b_e` for every active entry.
struct SensorRows {
    re: Vec<RVec>,
    im: Vec<RVec>,
    lo: Vec<C64>,
    up: Vec<C64>,
}

fn sensor_rows(model: &Model) -> SensorRows {
    let (n_g, k, t) = (model.n_g(), model.users(), model.slots());
    let len = n_g * k;
    let mut rows = SensorRows { re: Vec::new(), im: Vec::new(), lo: Vec::new(), up: Vec::new() };
    for j in 0..t {
        for i in 0..model.a_i.nrows() {
            if model.omega[(i, j)] == 0.0 {
                continue;
            }
            // b = Σ_{n,k} A_I[i,n] F[n,k] X[k,j]
            let a = CVec::from_fn(len, |idx, _| model.a_i[(i, idx % n_g)] * model.x[(idx / n_g, j)]);
            let mut re = RVec::zeros(2 * len);
            let mut im = RVec::zeros(2 * len);
            for p in 0..len {
                re[p] = a[p].re;
                re[len + p] = -a[p].im;
                im[p] = a[p].im;
                im[len + p] = a[p].re;
            }
            rows.re.push(re);
            rows.im.push(im);
            rows.lo.push(model.z_lo[(i, j)]);
            rows.up.push(model.z_up[(i, j)]);
        }
    }
    rows
}

fn to_real(v: &CVec) -> RVec {
    let n = v.len();
    RVec::from_fn(2 * n, |p, _| if p < n { v[p].re } else { v[p - n].im })
}

fn to_complex(x: &RVec) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |p, _| C64::new(x[p], x[n + p]))
}

/// `[[Re P, −Im P], [Im P, Re P]]`, so that `mᴴ P m = xᵀ P_r x`.
fn real_embedding(p: &CMat) -> RMat {
    let n = p.nrows();
    RMat::from_fn(2 * n, 2 * n, |i, j| {
        let v = p[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// `J`, and optionally its gradient and Hessian, at `x`.
struct Objective<'a> {
    p: &'a RMat,
    r: &'a RVec,
    rows: &'a SensorRows,
    sigma: f64,
}

impl Objective<'_> {
    /// `−ln Z`, its derivative and curvature for one real dimension.
    fn cell(&self, mu: f64, lo: f64, up: f64) -> (f64, f64, f64) {
        let m = trunc_gauss_moments(mu, self.sigma, lo, up);
        let s2 = self.sigma * self.sigma;
        (-m.log_z, (mu - m.mean) / s2, ((1.0 - m.var / s2) / s2).max(0.0))
    }

    fn value(&self, x: &RVec) -> f64 {
        let mut j = x.dot(&(self.p * x)) - 2.0 * self.r.dot(x);
        for e in 0..self.rows.re.len() {
            let (lo, up) = (self.rows.lo[e], self.rows.up[e]);
            j += self.cell(self.rows.re[e].dot(x), lo.re, up.re).0;
            j += self.cell(self.rows.im[e].dot(x), lo.im, up.im).0;
        }
        j
    }

    fn derivatives(&self, x: &RVec) -> (f64, RVec, RMat) {
        let mut grad = (self.p * x - self.r) * 2.0;
        let mut hess = self.p * 2.0;
        let mut j = x.dot(&(self.p * x)) - 2.0 * self.r.dot(x);
        for e in 0..self.rows.re.len() {
            let (lo, up) = (self.rows.lo[e], self.rows.up[e]);
            for (row, l, u) in [(&self.rows.re[e], lo.re, up.re), (&self.rows.im[e], lo.im, up.im)] {
                let (v, d1, d2) = self.cell(row.dot(x), l, u);
                j += v;
                grad.axpy(d1, row, 1.0);
                if d2 > 0.0 {
                    hess.ger(d2, row, row, 1.0);
                }
            }
        }
        (j, grad, hess)
    }
}

/// Newton iteration cap of [`update_f_sensor`].
const MAX_NEWTON: usize = 100;

/// Minimise `J` over `m_f` from the current mean, set the block
/// covariances of `q(f)`, and refresh `q(u)` on the active entries.
/// Returns the number of Newton steps taken.
pub fn update_f_sensor(model: &Model, st: &mut PosteriorState) -> Result<usize> {
    let base = FBase::new(model, st);
    let steps = solve_with_base(model, st, &base)?;
    super::update_u_active(model, st);
    Ok(steps)
}

pub(crate) fn solve_with_base(model: &Model, st: &mut PosteriorState, base: &FBase) -> Result<usize> {
    let (lam, rhs) = base.quadratic(model, st);
    let full = &lam + &model.af_gram * C64::new(model.beta_i, 0.0);
    st.f.cov = block_covariances(&full, &st.f.blocks)?;
    let p = real_embedding(&lam);
    let r = to_real(&rhs);
    let rows = sensor_rows(model);
    let obj = Objective { p: &p, r: &r, rows: &rows, sigma: model.sigma_i() / SQRT_2 };

    let mut x = to_real(&st.f.mean);
    let mut steps = 0;
    for _ in 0..MAX_NEWTON {
        let (j, grad, hess) = obj.derivatives(&x);
        let dir = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                // Curvature lost to round-off; fall back to the quadratic part.
                match (&p * 2.0).cholesky() {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => -&grad,
                }
            }
        };
        let slope = grad.dot(&dir);
        if !(slope < 0.0) || -slope <= 1e-12 * j.abs().max(1.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x + &dir * t;
            if obj.value(&cand) <= j + 1e-4 * t * slope {
                x = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        steps += 1;
        if !accepted {
            break;
        }
        if (&dir * t).norm() <= 1e-12 * x.norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    st.f.mean = to_complex(&x);
    Ok(steps)
}
