use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::channel::complex_normal;
use crate::linalg::{frobenius_sq, vectorize};
use crate::measurement::{reassign_inactive, NoiseLevels};
use crate::reference::{
    brute_expect_afg, brute_expect_agf, dense_afg, dense_agf, full_f_update, full_g_update, full_h_update, random_state,
};
use crate::trial::{TrialData, TrialSpec};

fn rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn relv(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn tiny_spec() -> TrialSpec {
    TrialSpec { bs_antennas: 2, irs_h: 2, irs_v: 1, users: 1, t: 2, n_a: 1, warmup_off: 0, ..TrialSpec::default() }
}

fn small_spec() -> TrialSpec {
    TrialSpec { bs_antennas: 4, irs_h: 2, irs_v: 2, users: 2, t: 12, n_a: 1, warmup_off: 3, ..TrialSpec::default() }
}

fn trial(spec: &TrialSpec, seed: u64) -> TrialData {
    spec.generate(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Model with unit noise precisions so random unit-scale states stay well conditioned.
fn unit_noise_model(data: &TrialData) -> Model {
    let mut m = data.model().unwrap();
    m.beta_b = 1.0;
    m.beta_i = 1.0;
    m
}

#[test]
fn afg_expectation_matches_exhaustive_sum() {
    for (spec, part) in [(tiny_spec(), PartitionSpec::unpartitioned()), (small_spec(), PartitionSpec { s_f: 2, s_g: 4, s_h: 2 })] {
        let data = trial(&spec, 1);
        let model = unit_noise_model(&data);
        let st = random_state(&mut ChaCha8Rng::seed_from_u64(2), &model, &part, &HyperParams::default()).unwrap();
        let fast = expect_afg_gram(&model, &st.g);
        let brute = brute_expect_afg(&model, &st.g);
        assert!(rel(&fast, &brute) < 1e-10, "relative error {}", rel(&fast, &brute));
    }
}

#[test]
fn agf_expectation_matches_exhaustive_sum() {
    for (spec, part) in [(tiny_spec(), PartitionSpec::unpartitioned()), (small_spec(), PartitionSpec { s_f: 4, s_g: 2, s_h: 1 })] {
        let data = trial(&spec, 3);
        let model = unit_noise_model(&data);
        let st = random_state(&mut ChaCha8Rng::seed_from_u64(4), &model, &part, &HyperParams::default()).unwrap();
        let fast = expect_agf_gram(&model, &st.f);
        let brute = brute_expect_agf(&model, &st.f);
        assert!(rel(&fast.dense(), &brute) < 1e-10);
    }
}

#[test]
fn deterministic_factor_reduces_to_plain_gram() {
    let data = trial(&small_spec(), 5);
    let model = unit_noise_model(&data);
    let mut st = random_state(&mut ChaCha8Rng::seed_from_u64(6), &model, &PartitionSpec::unpartitioned(), &HyperParams::default()).unwrap();
    for c in st.f.cov.iter_mut().chain(st.g.cov.iter_mut()) {
        c.fill(C64::new(0.0, 0.0));
    }
    let a = dense_afg(&model, &st.g.mean);
    assert!(rel(&expect_afg_gram(&model, &st.g), &(a.adjoint() * &a)) < 1e-10);
    let b = dense_agf(&model, &st.f.mean);
    assert!(rel(&expect_agf_gram(&model, &st.f).dense(), &(b.adjoint() * &b)) < 1e-10);
}

#[test]
fn kron_factor_product_matches_dense() {
    let data = trial(&small_spec(), 7);
    let model = unit_noise_model(&data);
    let st = random_state(&mut ChaCha8Rng::seed_from_u64(8), &model, &PartitionSpec::unpartitioned(), &HyperParams::default()).unwrap();
    let kg = expect_agf_gram(&model, &st.f);
    let dense = kg.dense();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = CVec::from_fn(kg.dim(), |_, _| complex_normal(&mut rng, 1.0));
    assert!(relv(&kg.mul_vec(&v), &(&dense * &v)) < 1e-12);
    let ident = vectorize(&CMat::identity(model.m_g(), model.n_g()));
    assert!(relv(&kg.mul_vec(&ident), &(&dense * &ident)) < 1e-12);
    assert!(rel(&kg.block(&(4..12)), &dense.view((4, 4), (8, 8)).into_owned()) < 1e-15);
}

#[test]
fn afg_expectation_matches_sampling() {
    let data = trial(&tiny_spec(), 10);
    let model = unit_noise_model(&data);
    let st = random_state(&mut ChaCha8Rng::seed_from_u64(11), &model, &PartitionSpec::unpartitioned(), &HyperParams::default()).unwrap();
    let closed = expect_afg_gram(&model, &st.g);
    let chol = st.g.cov[0].clone().cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 10_000;
    let n = closed.nrows();
    let mut mean = CMat::zeros(n, n);
    let mut sq = nalgebra::DMatrix::<f64>::zeros(n, n);
    for _ in 0..draws {
        let w = CVec::from_fn(st.g.len(), |_, _| complex_normal(&mut rng, 1.0));
        let g = &st.g.mean + &chol * w;
        let a = dense_afg(&model, &g);
        let s = a.adjoint() * &a;
        sq += s.map(|z| z.norm_sqr());
        mean += s;
    }
    mean /= C64::new(draws as f64, 0.0);
    for i in 0..n {
        for j in 0..n {
            let var = sq[(i, j)] / draws as f64 - mean[(i, j)].norm_sqr();
            let se = (var / draws as f64).sqrt();
            assert!((mean[(i, j)] - closed[(i, j)]).norm() < 4.0 * se + 1e-12, "entry ({i},{j})");
        }
    }
}

#[test]
fn single_block_updates_match_closed_forms() {
    let hyper = HyperParams::default();
    for seed in 0..10 {
        let data = trial(&small_spec(), 100 + seed);
        let model = unit_noise_model(&data);
        let st = random_state(&mut ChaCha8Rng::seed_from_u64(seed), &model, &PartitionSpec::unpartitioned(), &hyper).unwrap();

        let mut a = st.clone();
        update_f_blocks(&model, &mut a).unwrap();
        let (m, c) = full_f_update(&model, &st);
        assert!(relv(&a.f.mean, &m) < 1e-8 && rel(&a.f.cov[0], &c) < 1e-8);

        let mut a = st.clone();
        update_g_blocks(&model, &mut a).unwrap();
        let (m, c) = full_g_update(&model, &st);
        assert!(relv(&a.g.mean, &m) < 1e-8 && rel(&a.g.cov[0], &c) < 1e-8);

        let mut a = st.clone();
        update_h_blocks(&model, &mut a).unwrap();
        let (m, c) = full_h_update(&model, &st);
        assert!(relv(&a.h.mean, &m) < 1e-8 && rel(&a.h.cov[0], &c) < 1e-8);
    }
}

#[test]
fn direct_link_update_is_ridge_regression_without_reflection() {
    let hyper = HyperParams::default();
    let data = trial(&small_spec(), 20);
    let model = unit_noise_model(&data).leading_slots(3);
    assert!(model.s.iter().all(|z| *z == C64::new(0.0, 0.0)));
    let mut st = random_state(&mut ChaCha8Rng::seed_from_u64(21), &model, &PartitionSpec::unpartitioned(), &hyper).unwrap();
    update_h_blocks(&model, &mut st).unwrap();
    let a = crate::reference::dense_ah(&model);
    let mut lam = a.adjoint() * &a;
    for i in 0..lam.nrows() {
        lam[(i, i)] += st.h.gamma[i];
    }
    let expected = lam.lu().solve(&(a.adjoint() * vectorize(&model.y))).unwrap();
    assert!(relv(&st.h.mean, &expected) < 1e-10);
}

#[test]
fn zero_data_gives_zero_direct_mean() {
    let data = trial(&small_spec(), 22);
    let mut model = unit_noise_model(&data);
    model.y.fill(C64::new(0.0, 0.0));
    let mut st = random_state(&mut ChaCha8Rng::seed_from_u64(23), &model, &PartitionSpec::unpartitioned(), &HyperParams::default()).unwrap();
    st.f.mean.fill(C64::new(0.0, 0.0));
    update_h_blocks(&model, &mut st).unwrap();
    assert!(st.h.mean.norm() == 0.0);
}

#[test]
fn large_precision_shrinks_means() {
    let data = trial(&small_spec(), 24);
    let model = unit_noise_model(&data);
    let mut st = random_state(&mut ChaCha8Rng::seed_from_u64(25), &model, &PartitionSpec::unpartitioned(), &HyperParams::default()).unwrap();
    st.g.gamma.fill(1e14);
    update_g_blocks(&model, &mut st).unwrap();
    assert!(st.g.mean.norm() < 1e-8);
}

#[test]
fn gamma_update_examples() {
    let hyper = HyperParams::default();
    let mut fac = GaussianFactor::prior(3, vec![0..3], &hyper);
    fac.cov[0] = CMat::zeros(3, 3);
    fac.mean = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 2.0)]);
    update_gamma(&mut fac);
    assert!((fac.gamma[0] - 1.0).abs() < 1e-6);
    assert!((fac.gamma[1] - (hyper.a + 1.0) / hyper.b).abs() < 1e-6);
    assert!(fac.gamma[2] < fac.gamma[0]);
}

#[test]
fn sensor_update_brackets_and_passes_through() {
    let data = trial(&small_spec(), 30);
    let mut model = data.model().unwrap();
    let mut st = random_state(&mut ChaCha8Rng::seed_from_u64(31), &model, &PartitionSpec::unpartitioned(), &HyperParams::default()).unwrap();
    update_u(&model, &mut st);
    for (idx, u) in st.u.mean.iter().enumerate() {
        let (i, j) = (idx % model.z_lo.nrows(), idx / model.z_lo.nrows());
        let (lo, up) = (model.z_lo[(i, j)], model.z_up[(i, j)]);
        assert!(lo.re <= u.re && u.re <= up.re && lo.im <= u.im && u.im <= up.im);
    }
    model.z_lo.fill(C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    model.z_up.fill(C64::new(f64::INFINITY, f64::INFINITY));
    update_u(&model, &mut st);
    let (f, _, _) = model.means_as_matrices(&st);
    let b = model.irs_signal(&f);
    for (idx, u) in st.u.mean.iter().enumerate() {
        let (i, j) = (idx % b.nrows(), idx / b.nrows());
        assert!((u - b[(i, j)] * model.omega[(i, j)]).norm() < 1e-12 * b.norm().max(1.0));
    }
}

fn desk_config() -> VisblConfig {
    VisblConfig { partition: PartitionSpec::unpartitioned(), track_free_energy: true, ..VisblConfig::default() }
}

#[test]
fn every_update_lowers_free_energy() {
    for seed in 0..3 {
        let data = trial(&small_spec(), 40 + seed);
        let model = data.model().unwrap();
        let mut st = init_posterior(&model, &desk_config()).unwrap();
        let mut fe = free_energy(&model, &st).unwrap();
        for _ in 0..5 {
            let steps: [&dyn Fn(&mut PosteriorState); 7] = [
                &|s| update_g_blocks(&model, s).unwrap(),
                &|s| update_gamma(&mut s.g),
                &|s| update_h_blocks(&model, s).unwrap(),
                &|s| update_gamma(&mut s.h),
                &|s| update_f_blocks(&model, s).unwrap(),
                &|s| update_gamma(&mut s.f),
                &|s| update_u(&model, s),
            ];
            for (k, step) in steps.iter().enumerate() {
                step(&mut st);
                let next = free_energy(&model, &st).unwrap();
                assert!(next <= fe + 1e-9 * fe.abs(), "step {k}: {fe} -> {next}");
                fe = next;
            }
        }
    }
}

#[test]
fn inactive_threshold_reassignment_has_no_effect() {
    let spec = small_spec();
    let data = trial(&spec, 50);
    let cfg = VisblConfig { stop: StopRule { max_iters: 20, rel_tol: 1e-6 }, ..desk_config() };
    let a = run(&data.dict, &data.protocol, &data.meas, data.noise, &cfg).unwrap();
    let mut meas = data.meas.clone();
    reassign_inactive(&mut ChaCha8Rng::seed_from_u64(51), &mut meas, &data.protocol, &data.quantizer);
    assert_ne!(meas.z_lo, data.meas.z_lo);
    let b = run(&data.dict, &data.protocol, &meas, data.noise, &cfg).unwrap();
    assert!(rel(&a.estimate.cascaded, &b.estimate.cascaded) < 1e-10);
    assert!(rel(&a.estimate.h_bar, &b.estimate.h_bar) < 1e-10);
    assert_eq!(a.trace.free_energy, b.trace.free_energy);
}

#[test]
fn zero_channels_stay_finite() {
    let spec = small_spec();
    let mut data = trial(&spec, 60);
    data.channels.f_bar.fill(C64::new(0.0, 0.0));
    data.channels.g_bar.fill(C64::new(0.0, 0.0));
    data.channels.h_bar.fill(C64::new(0.0, 0.0));
    let noise = NoiseLevels { sigma_b2: 1e-6, sigma_i2: 1e-6 };
    let meas = crate::measurement::simulate(
        &mut ChaCha8Rng::seed_from_u64(61),
        &data.channels,
        &data.protocol,
        noise,
        &data.quantizer,
    )
    .unwrap();
    let out = run(&data.dict, &data.protocol, &meas, noise, &desk_config()).unwrap();
    assert!(out.estimate.is_finite());
    let signal = frobenius_sq(&out.estimate.cascaded) + frobenius_sq(&out.estimate.h_bar);
    assert!(signal < 1e-3, "{signal}");
}

#[test]
fn passive_only_initialization_is_vacuous() {
    let spec = TrialSpec { n_a: 0, ..small_spec() };
    let data = trial(&spec, 70);
    let model = data.model().unwrap();
    let st = init_posterior(&model, &desk_config()).unwrap();
    assert_eq!(st.f.mean.norm(), 0.0);
    let g0 = st.g.hyper.a / st.g.hyper.b;
    assert!(st.g.gamma.iter().all(|&g| (g - g0).abs() < 1e-12));
}

#[test]
fn covariance_blocks_are_hermitian_positive_definite() {
    let data = trial(&small_spec(), 80);
    let cfg = VisblConfig { partition: PartitionSpec { s_f: 2, s_g: 4, s_h: 2 }, stop: StopRule { max_iters: 10, rel_tol: 1e-6 }, ..desk_config() };
    let out = run(&data.dict, &data.protocol, &data.meas, data.noise, &cfg).unwrap();
    for c in out.state.f.cov.iter().chain(&out.state.g.cov).chain(&out.state.h.cov) {
        assert!((c - c.adjoint()).norm() <= 1e-12 * c.norm());
        let eig = c.clone().symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(0.0, f64::max);
        assert!(eig.iter().all(|&e| e > 0.0), "min eigenvalue {:?} of max {max}", eig.min());
    }
    assert!(out.state.f.gamma.iter().chain(out.state.g.gamma.iter()).all(|&g| g > 0.0));
}
