//! Quick internal consistency checks behind the `selftest` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::estimator::{expect_afg_gram, expect_agf_gram, run, trunc_gauss_moments, HyperParams, PartitionSpec, VisblConfig};
use crate::evaluation::{nmse_db, PowerModel};
use crate::measurement::design_quantizer;
use crate::reference::{brute_expect_afg, brute_expect_agf, random_state};
use crate::trial::TrialSpec;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn rel(a: &crate::linalg::CMat, b: &crate::linalg::CMat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn expectations() -> Check {
    let spec = TrialSpec { bs_antennas: 2, irs_h: 2, irs_v: 1, users: 1, t: 2, n_a: 1, warmup_off: 0, ..TrialSpec::default() };
    let res = (|| -> crate::Result<f64> {
        let data = spec.generate(&mut ChaCha8Rng::seed_from_u64(11))?;
        let mut model = data.model()?;
        model.beta_b = 1.0;
        model.beta_i = 1.0;
        let st = random_state(&mut ChaCha8Rng::seed_from_u64(12), &model, &PartitionSpec::unpartitioned(), &HyperParams::default())?;
        let e1 = rel(&expect_afg_gram(&model, &st.g), &brute_expect_afg(&model, &st.g));
        let e2 = rel(&expect_agf_gram(&model, &st.f).dense(), &brute_expect_agf(&model, &st.f));
        Ok(e1.max(e2))
    })();
    match res {
        Ok(e) => check("second-moment expectations", e < 1e-8, format!("max relative error {e:.2e}")),
        Err(e) => check("second-moment expectations", false, e.to_string()),
    }
}

/// Midpoint-rule mean of a truncated normal.
fn integrated_mean(mu: f64, sigma: f64, lo: f64, up: f64) -> f64 {
    let (a, b) = (lo.max(mu - 12.0 * sigma), up.min(mu + 12.0 * sigma));
    let n = 20_000;
    let h = (b - a) / n as f64;
    let (mut z, mut m) = (0.0, 0.0);
    for i in 0..n {
        let x = a + (i as f64 + 0.5) * h;
        let w = (-0.5 * ((x - mu) / sigma).powi(2)).exp();
        z += w;
        m += w * x;
    }
    m / z
}

fn truncated_moments() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (mu, sigma) = (rng.random_range(-3.0..3.0), rng.random_range(0.1..2.0));
        let lo = rng.random_range(-4.0..2.0);
        let up = lo + rng.random_range(0.05..4.0);
        let err = (trunc_gauss_moments(mu, sigma, lo, up).mean - integrated_mean(mu, sigma, lo, up)).abs() / sigma;
        worst = worst.max(err);
    }
    check("truncated-Gaussian means", worst < 1e-6, format!("max scaled error {worst:.2e}"))
}

fn power_constants() -> Check {
    let pm = PowerModel::default();
    let (adc, bs) = (pm.adc(4), pm.bs(16));
    let ok = (adc - 1.833e-3).abs() < 5e-7 && (bs - 4.282).abs() < 5e-4;
    check("power model constants", ok, format!("P_ADC(4) = {:.4} mW, P_BS(16) = {bs:.4} W", adc * 1e3))
}

fn quantizer() -> Check {
    let q = match design_quantizer(4, 1.0) {
        Ok(q) => q,
        Err(e) => return check("quantizer bracketing", false, e.to_string()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let bad = (0..10_000)
        .filter(|_| {
            let x = rng.random_range(-4.0..4.0);
            let c = q.quantize_real(x);
            !(c.lo <= x && x < c.up)
        })
        .count();
    check("quantizer bracketing", bad == 0, format!("{bad} of 10000 samples outside their cell"))
}

fn tiny_recovery() -> Check {
    let spec = TrialSpec { bs_antennas: 4, irs_h: 2, irs_v: 2, users: 1, t: 40, n_a: 1, warmup_off: 5, bits: 8, ..TrialSpec::default() };
    let res = (|| -> crate::Result<f64> {
        let data = spec.generate(&mut ChaCha8Rng::seed_from_u64(15))?;
        let out = run(&data.dict, &data.protocol, &data.meas, data.noise, &VisblConfig::default())?;
        nmse_db(&out.estimate.cascaded, &data.channels.cascaded())
    })();
    match res {
        Ok(db) => check("small end-to-end estimate", db < -10.0, format!("cascaded NMSE {db:.2} dB")),
        Err(e) => check("small end-to-end estimate", false, e.to_string()),
    }
}

/// Run every check.
pub fn run_all() -> Vec<Check> {
    vec![expectations(), truncated_moments(), power_constants(), quantizer(), tiny_recovery()]
}
