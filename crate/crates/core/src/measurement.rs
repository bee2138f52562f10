//! Training protocol, B-bit quantizer and measurement synthesis.
//!
//! Sensor observations are kept in pseudo-measurement form: every entry of
//! `Ẑ` carries a quantization interval, and entries where no sensor was
//! active are assigned the interval containing zero.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;

use crate::channel::{complex_normal, ChannelSet};
use crate::error::{config_err, dim_err, Result};
use crate::linalg::{CMat, RMat, C64, J};

/// Parameters for [`build_training`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub users: usize,
    pub irs_elements: usize,
    /// Training length `T`.
    pub t: usize,
    /// Coherence block length `T_c`.
    pub t_c: usize,
    /// Number of active sensors per slot.
    pub n_a: usize,
    /// Switching period `T_sn = 1/f_sn` in slots.
    pub switch_period: usize,
    /// Initial slots with the passive reflectors switched off.
    pub warmup_off: usize,
    /// Per-user training power in watts.
    pub tx_power_w: f64,
    /// Redraw reflection phases every slot (otherwise once per switching period).
    pub phase_per_slot: bool,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.users == 0 || self.irs_elements == 0 {
            return Err(config_err("T, K and N must be at least 1"));
        }
        if self.t > self.t_c {
            return Err(config_err(format!("T = {} exceeds T_c = {}", self.t, self.t_c)));
        }
        if self.n_a > self.irs_elements {
            return Err(config_err(format!("N_a = {} exceeds N = {}", self.n_a, self.irs_elements)));
        }
        if self.warmup_off > self.t {
            return Err(config_err(format!("warmup_off = {} exceeds T = {}", self.warmup_off, self.t)));
        }
        if self.switch_period == 0 {
            return Err(config_err("switching period must be at least one slot"));
        }
        if !(self.tx_power_w > 0.0) {
            return Err(config_err("transmit power must be positive"));
        }
        Ok(())
    }
}

/// Pilots, sensor schedule and reflection schedule of one training phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingProtocol {
    /// `K × T` pilots.
    pub x: CMat,
    /// `N × T` 0/1 sensor schedule `Ω`.
    pub omega: RMat,
    /// `N × T` reflection coefficients.
    pub v: CMat,
    /// `N × T` effective reflection `Ωᶜ ⊙ v`.
    pub s: CMat,
    pub t_c: usize,
    pub switch_period: usize,
    pub warmup_off: usize,
    pub n_a: usize,
}

impl TrainingProtocol {
    pub fn t(&self) -> usize {
        self.x.ncols()
    }

    pub fn users(&self) -> usize {
        self.x.nrows()
    }

    pub fn irs_elements(&self) -> usize {
        self.s.nrows()
    }

    /// Build a protocol from explicit matrices; `S` is derived.
    pub fn from_parts(x: CMat, omega: RMat, v: CMat, t_c: usize, switch_period: usize, warmup_off: usize) -> Result<Self> {
        let t = x.ncols();
        if omega.ncols() != t || v.ncols() != t || omega.nrows() != v.nrows() {
            return Err(dim_err("pilot, schedule and reflection matrices disagree"));
        }
        let n_a = if t > 0 { (0..omega.nrows()).filter(|&i| omega[(i, 0)] != 0.0).count() } else { 0 };
        let s = CMat::from_fn(v.nrows(), t, |i, j| v[(i, j)] * (1.0 - omega[(i, j)]));
        Ok(Self { x, omega, v, s, t_c, switch_period, warmup_off, n_a })
    }

    /// Protocol restricted to slots `range` (used for the reflectors-off warm-up).
    pub fn slots(&self, range: std::ops::Range<usize>) -> Self {
        let (start, len) = (range.start, range.len());
        Self {
            x: self.x.columns(start, len).into_owned(),
            omega: self.omega.columns(start, len).into_owned(),
            v: self.v.columns(start, len).into_owned(),
            s: self.s.columns(start, len).into_owned(),
            t_c: self.t_c,
            switch_period: self.switch_period,
            warmup_off: self.warmup_off.min(range.end).saturating_sub(start),
            n_a: self.n_a,
        }
    }
}

/// QPSK pilots at full power, random sensor subsets per switching period and
/// random-phase reflections after the reflectors-off warm-up.
pub fn build_training<R: Rng + ?Sized>(rng: &mut R, cfg: &TrainingConfig) -> Result<TrainingProtocol> {
    cfg.validate()?;
    let (k, n, t) = (cfg.users, cfg.irs_elements, cfg.t);
    let amp = (cfg.tx_power_w / 2.0).sqrt();
    let x = CMat::from_fn(k, t, |_, _| {
        let re = if rng.random::<bool>() { amp } else { -amp };
        let im = if rng.random::<bool>() { amp } else { -amp };
        C64::new(re, im)
    });

    let mut omega = RMat::zeros(n, t);
    let mut v = CMat::zeros(n, t);
    let mut active: Vec<usize> = Vec::new();
    let mut phases: Vec<f64> = vec![0.0; n];
    for col in 0..t {
        let new_period = col % cfg.switch_period == 0;
        if new_period {
            active = sample(rng, n, cfg.n_a).into_vec();
        }
        for &i in &active {
            omega[(i, col)] = 1.0;
        }
        if cfg.phase_per_slot || new_period {
            for p in phases.iter_mut() {
                *p = rng.random_range(0.0..2.0 * PI);
            }
        }
        if col >= cfg.warmup_off {
            for i in 0..n {
                v[(i, col)] = (J * phases[i]).exp();
            }
        }
    }
    TrainingProtocol::from_parts(x, omega, v, cfg.t_c, cfg.switch_period, cfg.warmup_off)
}

/// Step constants of the MSE-optimal uniform quantizer for a unit-variance
/// Gaussian input, `B = 1..=8`.
const OPTIMAL_STEP: [f64; 8] = [1.596, 0.9957, 0.5860, 0.3352, 0.1881, 0.1041, 0.0569, 0.0308];

/// Step constant `c_B` for a unit-variance Gaussian.
///
/// Beyond eight bits the overload point `c_B·2^(B-1)` is grown like
/// `√B`, following the `√(ln L)` growth of the optimal support.
pub fn optimal_step(bits: u32) -> f64 {
    let b = bits as usize;
    if (1..=8).contains(&b) {
        return OPTIMAL_STEP[b - 1];
    }
    let support8 = OPTIMAL_STEP[7] * 128.0;
    support8 * (bits as f64 / 8.0).sqrt() / 2f64.powi(bits as i32 - 1)
}

/// Mid-rise uniform quantizer applied to each real dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    pub bits: u32,
    pub step: f64,
    /// `2^B` representative values, increasing.
    pub levels: Vec<f64>,
    /// `2^B + 1` boundaries with `-∞`/`+∞` at the ends.
    pub thresholds: Vec<f64>,
}

/// One real-dimension quantization outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub level: f64,
    pub lo: f64,
    pub up: f64,
}

/// Complex quantization result: level and componentwise thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub z: C64,
    pub lo: C64,
    pub up: C64,
}

impl Quantizer {
    /// Quantizer with an explicit step.
    pub fn with_step(bits: u32, step: f64) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(config_err(format!("unsupported resolution B = {bits}")));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(config_err(format!("quantizer step must be positive, got {step}")));
        }
        let count = 1usize << bits;
        let half = (count / 2) as f64;
        let levels = (0..count).map(|i| (i as f64 - half + 0.5) * step).collect();
        let mut thresholds = Vec::with_capacity(count + 1);
        thresholds.push(f64::NEG_INFINITY);
        thresholds.extend((1..count).map(|i| (i as f64 - half) * step));
        thresholds.push(f64::INFINITY);
        Ok(Self { bits, step, levels, thresholds })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Cell `index` as `(level, lo, up)`.
    pub fn cell(&self, index: usize) -> Cell {
        Cell { index, level: self.levels[index], lo: self.thresholds[index], up: self.thresholds[index + 1] }
    }

    /// Cell containing `x`; intervals are closed below and open above.
    pub fn quantize_real(&self, x: f64) -> Cell {
        let count = self.num_levels() as i64;
        let raw = (x / self.step).floor() as i64 + count / 2;
        self.cell(raw.clamp(0, count - 1) as usize)
    }

    /// Index of the cell containing zero.
    pub fn zero_cell(&self) -> usize {
        self.num_levels() / 2
    }

    pub fn quantize(&self, u: C64) -> Quantized {
        let re = self.quantize_real(u.re);
        let im = self.quantize_real(u.im);
        Quantized { z: C64::new(re.level, im.level), lo: C64::new(re.lo, im.lo), up: C64::new(re.up, im.up) }
    }

    fn complex_cell(&self, re: usize, im: usize) -> Quantized {
        let (a, b) = (self.cell(re), self.cell(im));
        Quantized { z: C64::new(a.level, b.level), lo: C64::new(a.lo, b.lo), up: C64::new(a.up, b.up) }
    }
}

/// Quantizer for a complex input of standard deviation `signal_std`.
pub fn design_quantizer(bits: u32, signal_std: f64) -> Result<Quantizer> {
    if bits == 0 || bits > 16 {
        return Err(config_err(format!("unsupported resolution B = {bits}")));
    }
    if !(signal_std > 0.0) {
        return Err(config_err(format!("signal standard deviation must be positive, got {signal_std}")));
    }
    Quantizer::with_step(bits, optimal_step(bits) * signal_std / 2f64.sqrt())
}

pub fn quantize(q: &Quantizer, u: C64) -> Quantized {
    q.quantize(u)
}

/// BS and sensor observations of one training phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// `M × T` BS observations.
    pub y: CMat,
    /// `N × T` forwarded sensor observations, zero where `Ω = 0`.
    pub z: CMat,
    /// `N × T` pseudo-measurements.
    pub z_hat: CMat,
    pub z_lo: CMat,
    pub z_up: CMat,
    /// Pre-quantization sensor signal; diagnostics only.
    pub u_true: CMat,
    pub bits: u32,
}

/// Noise levels of the two receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevels {
    pub sigma_b2: f64,
    pub sigma_i2: f64,
}

/// Synthesize `Y = Ḡ(S ⊙ F̄X) + H̄X + N_B` and the quantized sensor data.
pub fn simulate<R: Rng + ?Sized>(
    rng: &mut R,
    ch: &ChannelSet,
    tp: &TrainingProtocol,
    noise: NoiseLevels,
    q: &Quantizer,
) -> Result<MeasurementSet> {
    let (m, n, t) = (ch.g_bar.nrows(), ch.f_bar.nrows(), tp.t());
    if tp.irs_elements() != n || tp.users() != ch.users() || ch.g_bar.ncols() != n || ch.h_bar.nrows() != m {
        return Err(dim_err("channel and protocol dimensions disagree"));
    }
    let fx = &ch.f_bar * &tp.x;
    let reflected = tp.s.component_mul(&fx);
    let mut y = &ch.g_bar * reflected + &ch.h_bar * &tp.x;
    for e in y.iter_mut() {
        *e += complex_normal(rng, noise.sigma_b2);
    }

    let mut u = CMat::from_fn(n, t, |i, j| fx[(i, j)] * tp.omega[(i, j)]);
    for e in u.iter_mut() {
        *e += complex_normal(rng, noise.sigma_i2);
    }

    let mut z_hat = CMat::zeros(n, t);
    let mut z_lo = CMat::zeros(n, t);
    let mut z_up = CMat::zeros(n, t);
    let zero = q.complex_cell(q.zero_cell(), q.zero_cell());
    for j in 0..t {
        for i in 0..n {
            let cell = if tp.omega[(i, j)] != 0.0 { q.quantize(u[(i, j)]) } else { zero };
            z_hat[(i, j)] = cell.z;
            z_lo[(i, j)] = cell.lo;
            z_up[(i, j)] = cell.up;
        }
    }
    let z = CMat::from_fn(n, t, |i, j| z_hat[(i, j)] * tp.omega[(i, j)]);
    Ok(MeasurementSet { y, z, z_hat, z_lo, z_up, u_true: u, bits: q.bits })
}

/// Reassign the pseudo-measurement cells of every inactive entry to a
/// randomly chosen cell. Observed entries are untouched.
pub fn reassign_inactive<R: Rng + ?Sized>(rng: &mut R, meas: &mut MeasurementSet, tp: &TrainingProtocol, q: &Quantizer) {
    let count = q.num_levels();
    for j in 0..tp.t() {
        for i in 0..tp.irs_elements() {
            if tp.omega[(i, j)] == 0.0 {
                let cell = q.complex_cell(rng.random_range(0..count), rng.random_range(0..count));
                meas.z_hat[(i, j)] = cell.z;
                meas.z_lo[(i, j)] = cell.lo;
                meas.z_up[(i, j)] = cell.up;
            }
        }
    }
}
