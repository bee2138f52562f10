//! Rician multipath links, array responses, angular dictionaries and the
//! virtual (angular-domain) channel representation.
//!
//! Array responses are unnormalised (unit-modulus entries) so that a
//! critically sampled dictionary has Gram matrix `M·I`.
//!
//! The IRS is a UPA whose response is `a_v ⊗ a_h`: a vertical ramp with
//! phase `π cos θ_Z` per row and a horizontal ramp with phase
//! `π sin θ_Z sin θ_A` per column. Directions are handled internally as
//! direction cosines `(u_h, u_v) = (sin θ_Z sin θ_A, cos θ_Z)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, dim_err, Error, Result};
use crate::linalg::{from_db10, CMat, CVec, C64, J};

/// BS ULA with `bs_antennas` elements and an `irs_h × irs_v` IRS UPA, both at
/// half-wavelength spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub bs_antennas: usize,
    pub irs_h: usize,
    pub irs_v: usize,
}

impl ArrayGeometry {
    pub fn new(bs_antennas: usize, irs_h: usize, irs_v: usize) -> Result<Self> {
        if bs_antennas == 0 || irs_h == 0 || irs_v == 0 {
            return Err(config_err("array dimensions must be at least 1"));
        }
        Ok(Self { bs_antennas, irs_h, irs_v })
    }

    pub fn irs_elements(&self) -> usize {
        self.irs_h * self.irs_v
    }
}

fn phase_ramp(len: usize, cosine: f64) -> CVec {
    CVec::from_fn(len, |p, _| (J * PI * p as f64 * cosine).exp())
}

/// ULA response `exp(jπ p sin θ)`, `p = 0..m`.
pub fn steering_ula(m: usize, theta: f64) -> CVec {
    phase_ramp(m, theta.sin())
}

/// UPA response for azimuth `azimuth` and zenith `zenith`.
pub fn steering_upa(nh: usize, nv: usize, azimuth: f64, zenith: f64) -> CVec {
    steering_upa_cosines(nh, nv, zenith.sin() * azimuth.sin(), zenith.cos())
}

/// UPA response from direction cosines.
pub fn steering_upa_cosines(nh: usize, nv: usize, u_h: f64, u_v: f64) -> CVec {
    let v = phase_ramp(nv, u_v);
    let h = phase_ramp(nh, u_h);
    v.kronecker(&h)
}

/// Uniform direction-cosine grid over `[-1, 1)`.
fn cosine_grid(size: usize) -> Vec<f64> {
    (0..size).map(|i| -1.0 + 2.0 * i as f64 / size as f64).collect()
}

fn nearest_on_grid(grid: &[f64], u: f64) -> usize {
    // Phase ramps are 2-periodic in the cosine, so distances wrap.
    let dist = |g: f64| {
        let d = (u - g).rem_euclid(2.0);
        d.min(2.0 - d)
    };
    let mut best = 0;
    for (i, &g) in grid.iter().enumerate() {
        if dist(g) < dist(grid[best]) {
            best = i;
        }
    }
    best
}

/// Overcomplete steering dictionaries for the BS (`A_B`) and the IRS (`A_I`).
#[derive(Debug, Clone)]
pub struct SteeringDictionary {
    pub geometry: ArrayGeometry,
    /// `M × M_g` BS dictionary.
    pub a_b: CMat,
    /// `N × N_g` IRS dictionary, `A_v ⊗ A_h` column ordering.
    pub a_i: CMat,
    /// Grid of `sin θ̂` for the BS columns.
    pub bs_grid: Vec<f64>,
    /// Horizontal direction-cosine sub-grid of the IRS.
    pub irs_grid_h: Vec<f64>,
    /// Vertical direction-cosine sub-grid of the IRS.
    pub irs_grid_v: Vec<f64>,
}

impl SteeringDictionary {
    pub fn m_g(&self) -> usize {
        self.a_b.ncols()
    }

    pub fn n_g(&self) -> usize {
        self.a_i.ncols()
    }

    /// Direction cosines `(u_h, u_v)` of IRS column `j`.
    pub fn irs_cosines(&self, j: usize) -> (f64, f64) {
        let nh = self.irs_grid_h.len();
        (self.irs_grid_h[j % nh], self.irs_grid_v[j / nh])
    }

    /// `(azimuth, zenith)` of IRS column `j`, or `None` when the cosine pair
    /// lies outside the visible region.
    pub fn irs_angles(&self, j: usize) -> Option<(f64, f64)> {
        let (u_h, u_v) = self.irs_cosines(j);
        let zenith = u_v.acos();
        let s = zenith.sin();
        if s == 0.0 {
            return (u_h == 0.0).then_some((0.0, zenith));
        }
        let r = u_h / s;
        (r.abs() <= 1.0).then(|| (r.asin(), zenith))
    }

    fn irs_index(&self, jh: usize, jv: usize) -> usize {
        jv * self.irs_grid_h.len() + jh
    }
}

/// Factor `n_g` into `(n_g_h, n_g_v)` with the same aspect ratio as the IRS.
fn factor_irs_grid(geom: &ArrayGeometry, n_g: usize) -> Result<(usize, usize)> {
    let (nh, nv) = (geom.irs_h, geom.irs_v);
    for gh in nh..=n_g {
        if n_g % gh != 0 {
            continue;
        }
        let gv = n_g / gh;
        if gv >= nv && gh * nv == gv * nh {
            return Ok((gh, gv));
        }
    }
    Err(config_err(format!(
        "IRS grid size {n_g} cannot be split proportionally to a {nh}x{nv} array"
    )))
}

pub fn build_dictionaries(geom: ArrayGeometry, m_g: usize, n_g: usize) -> Result<SteeringDictionary> {
    if m_g < geom.bs_antennas {
        return Err(config_err(format!("BS grid {m_g} smaller than M = {}", geom.bs_antennas)));
    }
    if n_g < geom.irs_elements() {
        return Err(config_err(format!("IRS grid {n_g} smaller than N = {}", geom.irs_elements())));
    }
    let (n_g_h, n_g_v) = factor_irs_grid(&geom, n_g)?;
    build_dictionaries_with_grid(geom, m_g, n_g_h, n_g_v)
}

/// Dictionaries with an explicit `n_g_h × n_g_v` IRS grid.
pub fn build_dictionaries_with_grid(
    geom: ArrayGeometry,
    m_g: usize,
    n_g_h: usize,
    n_g_v: usize,
) -> Result<SteeringDictionary> {
    if m_g < geom.bs_antennas || n_g_h < geom.irs_h || n_g_v < geom.irs_v {
        return Err(config_err("dictionary grids must be at least as large as the arrays"));
    }
    let bs_grid = cosine_grid(m_g);
    let irs_grid_h = cosine_grid(n_g_h);
    let irs_grid_v = cosine_grid(n_g_v);
    let m = geom.bs_antennas;
    let mut a_b = CMat::zeros(m, m_g);
    for (j, &u) in bs_grid.iter().enumerate() {
        a_b.set_column(j, &phase_ramp(m, u));
    }
    let mut a_i = CMat::zeros(geom.irs_elements(), n_g_h * n_g_v);
    for (jv, &uv) in irs_grid_v.iter().enumerate() {
        for (jh, &uh) in irs_grid_h.iter().enumerate() {
            a_i.set_column(jv * n_g_h + jh, &steering_upa_cosines(geom.irs_h, geom.irs_v, uh, uv));
        }
    }
    Ok(SteeringDictionary { geometry: geom, a_b, a_i, bs_grid, irs_grid_h, irs_grid_v })
}

/// Path loss in dB for a link of length `d` metres.
pub fn path_loss_db(d: f64, los: bool) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("link distance must be positive, got {d}")));
    }
    Ok(if los { 31.4 + 20.0 * d.log10() } else { 42.0 + 29.2 * d.log10() })
}

/// Per-link statistical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Linear Rician factor; `0` for NLoS, `f64::INFINITY` for pure LoS.
    pub rician_k: f64,
    pub n_nlos_paths: usize,
    pub path_loss_db: f64,
    pub los: bool,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rician_k >= 0.0) {
            return Err(config_err(format!("Rician factor must be >= 0, got {}", self.rician_k)));
        }
        if !self.los && self.rician_k != 0.0 {
            return Err(config_err("NLoS links must have a zero Rician factor"));
        }
        Ok(())
    }

    /// `(LoS weight, per-NLoS-path weight)` before the array-size factor.
    fn weights(&self) -> (f64, f64) {
        let k = self.rician_k;
        let l = self.n_nlos_paths as f64;
        if k.is_infinite() {
            return (1.0, 0.0);
        }
        let los = if self.los { (k / (1.0 + k)).sqrt() } else { 0.0 };
        let nlos = if self.n_nlos_paths > 0 { (1.0 / (l * (1.0 + k))).sqrt() } else { 0.0 };
        (los, nlos)
    }
}

/// One propagation path: complex amplitude (all weights folded in) and angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path<A> {
    pub gain: C64,
    pub angle: A,
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * (var / 2.0).sqrt()
}

/// Draw the paths of one Rician link. `scale` is the array-size factor
/// (`N`, `MN` or `M`); `sample_angle` draws a path direction.
pub fn draw_link<R, A, F>(rng: &mut R, params: &LinkParams, scale: f64, mut sample_angle: F) -> Vec<Path<A>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> A,
{
    let (w_los, w_nlos) = params.weights();
    let gain_var = 1.0 / from_db10(params.path_loss_db);
    let mut paths = Vec::with_capacity(params.n_nlos_paths + 1);
    if params.los && w_los > 0.0 {
        let alpha = complex_normal(rng, gain_var);
        let angle = sample_angle(rng);
        paths.push(Path { gain: alpha * (scale.sqrt() * w_los), angle });
    }
    if w_nlos > 0.0 {
        for _ in 0..params.n_nlos_paths {
            let alpha = complex_normal(rng, gain_var);
            let angle = sample_angle(rng);
            paths.push(Path { gain: alpha * (scale.sqrt() * w_nlos), angle });
        }
    }
    paths
}

/// Uniform azimuth on `(-π/2, π/2)`.
pub fn sample_azimuth<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-PI / 2.0..PI / 2.0)
}

/// Uniform zenith on `(π/4, 3π/4)`.
pub fn sample_zenith<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(PI / 4.0..3.0 * PI / 4.0)
}

/// Ground-truth links and, for on-grid draws, their angular representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// UE-IRS, `N × K`.
    pub f_bar: CMat,
    /// IRS-BS, `M × N`.
    pub g_bar: CMat,
    /// UE-BS, `M × K`.
    pub h_bar: CMat,
    /// Angular UE-IRS, `N_g × K`.
    pub f: Option<CMat>,
    /// Angular IRS-BS, `M_g × N_g`.
    pub g: Option<CMat>,
    /// Angular UE-BS, `M_g × K`.
    pub h: Option<CMat>,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.f_bar.ncols()
    }

    pub fn cascaded(&self) -> CMat {
        cascaded_channel(&self.f_bar, &self.g_bar).expect("consistent channel dimensions")
    }
}

/// `kr(F̄ᵀ, Ḡ)`: column `k` is `vec(Ḡ diag(f̄_k))`.
pub fn cascaded_channel(f_bar: &CMat, g_bar: &CMat) -> Result<CMat> {
    if f_bar.nrows() != g_bar.ncols() {
        return Err(dim_err(format!(
            "F̄ has {} rows but Ḡ has {} columns",
            f_bar.nrows(),
            g_bar.ncols()
        )));
    }
    let m = g_bar.nrows();
    Ok(CMat::from_fn(m * g_bar.ncols(), f_bar.ncols(), |row, k| g_bar[(row % m, row / m)] * f_bar[(row / m, k)]))
}

/// Large-scale scenario description. Positions are 2-D, in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub bs_position: [f64; 2],
    pub irs_position: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Training-phase transmit power per user.
    pub tx_power_dbm: f64,
    /// Data-phase transmit power per user (used by the rate evaluation).
    pub data_tx_power_dbm: f64,
    pub kappa_ui_db: f64,
    pub kappa_ib_db: f64,
    pub kappa_ub_db: f64,
    pub paths_ui: usize,
    pub paths_ib: usize,
    pub paths_ub: usize,
    /// Snap path angles to the dictionary grid.
    pub on_grid: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0],
            irs_position: [20.0, 10.0],
            user_center: [40.0, 0.0],
            user_radius: 5.0,
            bandwidth_hz: 80e6,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            tx_power_dbm: 23.0,
            data_tx_power_dbm: 23.0,
            kappa_ui_db: 13.2,
            kappa_ib_db: 13.2,
            kappa_ub_db: f64::NEG_INFINITY,
            paths_ui: 4,
            paths_ib: 4,
            paths_ub: 4,
            on_grid: true,
        }
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    from_db10(dbm - 30.0)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if distance(self.bs_position, self.irs_position) <= 0.0 {
            return Err(config_err("BS and IRS must not coincide"));
        }
        if !(self.user_radius >= 0.0) {
            return Err(config_err("user radius must be non-negative"));
        }
        let c = self.user_center;
        if distance(c, self.irs_position) <= self.user_radius || distance(c, self.bs_position) <= self.user_radius {
            return Err(config_err("user circle must not reach the BS or IRS"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(config_err("bandwidth must be positive"));
        }
        for (name, k) in [("kappa_ui_db", self.kappa_ui_db), ("kappa_ib_db", self.kappa_ib_db)] {
            if k.is_nan() {
                return Err(config_err(format!("{name} is NaN")));
            }
        }
        Ok(())
    }

    /// Thermal noise power `W·N0·NF` in watts.
    pub fn noise_power_w(&self) -> f64 {
        self.bandwidth_hz * dbm_to_watt(self.noise_density_dbm_hz) * from_db10(self.noise_figure_db)
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watt(self.tx_power_dbm)
    }

    pub fn data_tx_power_w(&self) -> f64 {
        dbm_to_watt(self.data_tx_power_dbm)
    }

    /// UE-IRS path loss at the centre of the user circle, for receiver-side
    /// calibration that must not depend on the drawn user positions.
    pub fn mean_ue_irs_path_loss_db(&self) -> f64 {
        path_loss_db(distance(self.user_center, self.irs_position), true).expect("validated geometry")
    }

    fn link(kappa_db: f64, paths: usize, d: f64) -> Result<LinkParams> {
        let rician_k = from_db10(kappa_db);
        let los = rician_k > 0.0;
        let p = LinkParams { rician_k, n_nlos_paths: paths, path_loss_db: path_loss_db(d, los)?, los };
        p.validate()?;
        Ok(p)
    }
}

/// Angle of a BS-side path, as `sin θ`.
#[derive(Debug, Clone, Copy)]
struct BsDir(f64);

/// Angle of an IRS-side path, as direction cosines.
#[derive(Debug, Clone, Copy)]
struct IrsDir(f64, f64);

fn draw_bs_dir<R: Rng + ?Sized>(rng: &mut R, dict: &SteeringDictionary, on_grid: bool) -> (BsDir, Option<usize>) {
    let u = sample_azimuth(rng).sin();
    if on_grid {
        let j = nearest_on_grid(&dict.bs_grid, u);
        (BsDir(dict.bs_grid[j]), Some(j))
    } else {
        (BsDir(u), None)
    }
}

fn draw_irs_dir<R: Rng + ?Sized>(rng: &mut R, dict: &SteeringDictionary, on_grid: bool) -> (IrsDir, Option<usize>) {
    let az = sample_azimuth(rng);
    let zen = sample_zenith(rng);
    let (uh, uv) = (zen.sin() * az.sin(), zen.cos());
    if on_grid {
        let jh = nearest_on_grid(&dict.irs_grid_h, uh);
        let jv = nearest_on_grid(&dict.irs_grid_v, uv);
        (IrsDir(dict.irs_grid_h[jh], dict.irs_grid_v[jv]), Some(dict.irs_index(jh, jv)))
    } else {
        (IrsDir(uh, uv), None)
    }
}

/// Draw user positions, all three link families and (on-grid) their angular
/// counterparts. Identical RNG state and inputs give identical output.
pub fn draw_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    dict: &SteeringDictionary,
    users: usize,
    on_grid: bool,
) -> Result<ChannelSet> {
    cfg.validate()?;
    let geom = dict.geometry;
    let (m, n) = (geom.bs_antennas, geom.irs_elements());
    let (m_g, n_g) = (dict.m_g(), dict.n_g());

    let mut f_bar = CMat::zeros(n, users);
    let mut g_bar = CMat::zeros(m, n);
    let mut h_bar = CMat::zeros(m, users);
    let mut f = CMat::zeros(n_g, users);
    let mut g = CMat::zeros(m_g, n_g);
    let mut h = CMat::zeros(m_g, users);

    // IRS-BS link is common to all users.
    let d_ib = distance(cfg.irs_position, cfg.bs_position);
    let ib = ScenarioConfig::link(cfg.kappa_ib_db, cfg.paths_ib, d_ib)?;
    let paths = draw_link(rng, &ib, (m * n) as f64, |r| (draw_bs_dir(r, dict, on_grid), draw_irs_dir(r, dict, on_grid)));
    for p in &paths {
        let ((bs, jb), (irs, ji)) = p.angle;
        let a_b = phase_ramp(m, bs.0);
        let a_i = steering_upa_cosines(geom.irs_h, geom.irs_v, irs.0, irs.1);
        g_bar += (a_b * a_i.adjoint()) * p.gain;
        if let (Some(jb), Some(ji)) = (jb, ji) {
            g[(jb, ji)] += p.gain;
        }
    }

    for k in 0..users {
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let pos = [
            cfg.user_center[0] + cfg.user_radius * phi.cos(),
            cfg.user_center[1] + cfg.user_radius * phi.sin(),
        ];

        let ui = ScenarioConfig::link(cfg.kappa_ui_db, cfg.paths_ui, distance(pos, cfg.irs_position))?;
        for p in draw_link(rng, &ui, n as f64, |r| draw_irs_dir(r, dict, on_grid)) {
            let (irs, ji) = p.angle;
            let a_i = steering_upa_cosines(geom.irs_h, geom.irs_v, irs.0, irs.1);
            let mut col = f_bar.column_mut(k);
            col += a_i * p.gain;
            if let Some(ji) = ji {
                f[(ji, k)] += p.gain;
            }
        }

        let ub = ScenarioConfig::link(cfg.kappa_ub_db, cfg.paths_ub, distance(pos, cfg.bs_position))?;
        for p in draw_link(rng, &ub, m as f64, |r| draw_bs_dir(r, dict, on_grid)) {
            let (bs, jb) = p.angle;
            let mut col = h_bar.column_mut(k);
            col += phase_ramp(m, bs.0) * p.gain;
            if let Some(jb) = jb {
                h[(jb, k)] += p.gain;
            }
        }
    }

    let angular = on_grid.then_some(());
    Ok(ChannelSet {
        f_bar,
        g_bar,
        h_bar,
        f: angular.map(|_| f),
        g: angular.map(|_| g),
        h: angular.map(|_| h),
    })
}
