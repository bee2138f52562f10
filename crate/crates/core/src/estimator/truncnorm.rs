//! Moments of a univariate Gaussian truncated to an interval.
//!
//! Tail intervals are handled through the scaled complementary error
//! function so that neither the normaliser nor the density ratio underflows.

use std::f64::consts::{PI, SQRT_2};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
/// Below this standardized width the interval is treated as locally uniform.
const NARROW: f64 = 1e-5;

/// Moments and normaliser of `N(mu, sigma²)` restricted to `[lo, up)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncMoments {
    pub mean: f64,
    pub var: f64,
    /// `ln(Φ(β) − Φ(α))`.
    pub log_z: f64,
    pub entropy: f64,
    /// Set when the narrow-interval expansion replaced the exact formulas.
    pub approximate: bool,
}

/// `exp(z²)·erfc(z)` for `z ≥ 0`.
pub fn erfcx(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 20.0 {
        return (z * z).exp() * libm::erfc(z);
    }
    // Asymptotic series; at z = 20 the first omitted term is ~1e-17.
    let inv = 1.0 / (2.0 * z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..8 {
        term *= -((2 * n - 1) as f64) * inv;
        sum += term;
    }
    sum / (z * PI.sqrt())
}

/// Mills ratio `Q(x)/φ(x)` for `x ≥ 0`.
fn mills(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    erfcx(x / SQRT_2) * (PI / 2.0).sqrt()
}

fn phi(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x - HALF_LN_2PI).exp()
    }
}

// x·φ(x) with the convention 0 at ±∞.
fn x_phi(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * phi(x)
    }
}

/// Standardized `(λ1, λ2, ln Z)` for `0 ≤ α < β`, with
/// `E[x] = μ + σλ1` and `Var = σ²(1 + λ2 − λ1²)`.
fn right_tail(alpha: f64, beta: f64) -> (f64, f64, f64) {
    let r = if beta.is_infinite() { 0.0 } else { (-(beta - alpha) * (beta + alpha) / 2.0).exp() };
    let d = mills(alpha) - if r == 0.0 { 0.0 } else { r * mills(beta) };
    let rb = if r == 0.0 { 0.0 } else { r * beta };
    ((1.0 - r) / d, (alpha - rb) / d, -0.5 * alpha * alpha - HALF_LN_2PI + d.ln())
}

/// Truncated-Gaussian moments on `[lo, up)`; requires `sigma > 0` and `lo < up`.
pub fn trunc_gauss_moments(mu: f64, sigma: f64, lo: f64, up: f64) -> TruncMoments {
    debug_assert!(sigma > 0.0 && lo < up, "invalid truncation ({mu}, {sigma}, {lo}, {up})");
    let alpha = (lo - mu) / sigma;
    let beta = (up - mu) / sigma;
    let width = beta - alpha;

    let (l1, l2, log_z, approximate) = if width < NARROW {
        let c = 0.5 * (alpha + beta);
        let w2 = width * width;
        // Locally uniform density tilted by the Gaussian slope at the centre.
        let l1 = c - c * w2 / 12.0;
        let var = w2 / 12.0;
        (l1, var - 1.0 + l1 * l1, width.ln() - 0.5 * c * c - HALF_LN_2PI, true)
    } else if alpha >= 0.0 {
        let (l1, l2, lz) = right_tail(alpha, beta);
        (l1, l2, lz, false)
    } else if beta <= 0.0 {
        let (l1, l2, lz) = right_tail(-beta, -alpha);
        (-l1, l2, lz, false)
    } else {
        let z = 1.0 - 0.5 * libm::erfc(beta / SQRT_2) - 0.5 * libm::erfc(-alpha / SQRT_2);
        let l1 = (phi(alpha) - phi(beta)) / z;
        let l2 = (x_phi(alpha) - x_phi(beta)) / z;
        (l1, l2, z.ln(), false)
    };

    let var_std = (1.0 + l2 - l1 * l1).max(0.0);
    let mean = (mu + sigma * l1).clamp(lo, up);
    let entropy = sigma.ln() + log_z + HALF_LN_2PI + 0.5 * (var_std + l1 * l1);
    TruncMoments { mean, var: sigma * sigma * var_std, log_z, entropy, approximate }
}
