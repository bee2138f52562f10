//! Property tests over the numerical building blocks.

use proptest::prelude::*;

use irs_visbl::estimator::{block_ranges, trunc_gauss_moments};
use irs_visbl::evaluation::{energy_efficiency, power_total, PowerModel, PowerPoint};
use irs_visbl::harness::{trial_seed, ExperimentConfig};
use irs_visbl::measurement::{design_quantizer, Quantizer};

fn point(n_a: usize, bits: u32) -> PowerPoint {
    PowerPoint { bs_antennas: 16, n_a, bits, bandwidth: 80e6, t: 400, t_c: 1800 }
}

proptest! {
    #[test]
    fn quantizer_cell_brackets_input(bits in 1u32..=12, step in 1e-6f64..10.0, x in -1e3f64..1e3) {
        let q = Quantizer::with_step(bits, step).unwrap();
        let c = q.quantize_real(x);
        prop_assert!(c.lo <= x && x < c.up, "{x} outside [{}, {})", c.lo, c.up);
        prop_assert!(c.lo <= c.level && c.level <= c.up);
        prop_assert_eq!(q.num_levels(), 1usize << bits);
    }

    #[test]
    fn quantizer_levels_are_symmetric(bits in 1u32..=10, std in 1e-6f64..1e2) {
        let q = design_quantizer(bits, std).unwrap();
        let n = q.num_levels();
        for i in 0..n {
            prop_assert!((q.levels[i] + q.levels[n - 1 - i]).abs() <= 1e-12 * q.step * n as f64);
        }
        prop_assert!(q.thresholds.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn truncated_moments_stay_inside_the_cell(
        mu in -50.0f64..50.0,
        sigma in 1e-4f64..20.0,
        a in -40.0f64..40.0,
        w in 1e-6f64..40.0,
        side in 0usize..3,
    ) {
        let (lo, up) = match side {
            0 => (f64::NEG_INFINITY, a),
            1 => (a, f64::INFINITY),
            _ => (a, a + w),
        };
        let m = trunc_gauss_moments(mu, sigma, lo, up);
        prop_assert!(m.mean.is_finite() && m.var.is_finite() && m.log_z.is_finite());
        prop_assert!(lo <= m.mean && m.mean <= up, "mean {} outside [{lo}, {up}]", m.mean);
        prop_assert!(m.var >= 0.0 && m.var <= sigma * sigma * (1.0 + 1e-9));
        prop_assert!(m.log_z <= 1e-12);
    }

    #[test]
    fn power_grows_with_sensors_and_bits(n_a in 1usize..64, bits in 1u32..12) {
        let pm = PowerModel::default();
        let p = power_total(&pm, &point(n_a, bits));
        prop_assert!(p > pm.bs(16));
        prop_assert!(power_total(&pm, &point(n_a + 1, bits)) > p);
        prop_assert!(power_total(&pm, &point(n_a, bits + 1)) > p);
    }

    #[test]
    fn efficiency_is_linear_in_rate(se in 0.0f64..50.0, n_a in 0usize..32) {
        let pm = PowerModel::default();
        let op = point(n_a, 4);
        let p = power_total(&pm, &op);
        let ee = energy_efficiency(se, p, op.bandwidth).unwrap();
        prop_assert!((ee * p - op.bandwidth * se).abs() <= 1e-9 * (op.bandwidth * se).max(1.0));
    }

    #[test]
    fn block_ranges_tile_the_vector(w in 1usize..20, s in 1usize..10) {
        let r = block_ranges(w * s, s).unwrap();
        prop_assert_eq!(r.len(), s);
        prop_assert_eq!(r[0].start, 0);
        prop_assert_eq!(r[s - 1].end, w * s);
        prop_assert!(r.windows(2).all(|p| p[0].end == p[1].start && p[0].len() == p[1].len()));
    }

    #[test]
    fn uneven_blocks_are_rejected(len in 2usize..100, s in 2usize..10) {
        prop_assume!(len % s != 0);
        prop_assert!(block_ranges(len, s).is_err());
    }

    #[test]
    fn config_survives_canonical_round_trip(seed in 0..=i64::MAX as u64, n_a in 0usize..16, bits in 1u32..12, s_g in prop::sample::select(vec![1usize, 2, 4, 8])) {
        let overrides = vec![
            format!("seed={seed}"),
            format!("training.n_a={n_a}"),
            format!("training.bits={bits}"),
            format!("visbl.partition.s_g={s_g}"),
        ];
        let cfg = ExperimentConfig::from_toml_str("", &overrides).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.canonical(), &[]).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn trial_seeds_are_reproducible(base in any::<u64>(), trial in 0usize..1000) {
        prop_assert_eq!(trial_seed(base, trial), trial_seed(base, trial));
        prop_assert_ne!(trial_seed(base, trial), trial_seed(base, trial + 1));
    }
}

#[test]
fn seeds_beyond_toml_integers_are_rejected() {
    let big = format!("seed={}", i64::MAX as u64 + 1);
    assert!(ExperimentConfig::from_toml_str("", &[big]).is_err());
}

#[test]
fn unknown_keys_are_rejected() {
    for bad in ["bogus=1", "training.bogus=1", "visbl.stop.bogus=1"] {
        assert!(ExperimentConfig::from_toml_str("", &[bad.to_string()]).is_err(), "{bad}");
    }
}
