//! VI-SBL against OMP and ridge LS on the same measurements.
//!
//! `cargo run --release --example baselines_comparison [trials]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irs_visbl::baselines::{build_cascaded_model, default_ridge, ls_estimate, omp_budget, omp_estimate};
use irs_visbl::estimator::{run, PartitionSpec, VisblConfig};
use irs_visbl::evaluation::nmse_db;
use irs_visbl::trial::TrialSpec;

fn main() -> irs_visbl::Result<()> {
    let trials: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let spec = TrialSpec::desk();
    let cfg = VisblConfig { partition: PartitionSpec::unpartitioned(), ..VisblConfig::default() };
    let sc = &spec.scenario;

    println!("trial   VI-SBL      OMP       LS   (cascaded NMSE, dB)");
    let mut sums = [0.0; 3];
    for seed in 0..trials {
        let data = spec.generate(&mut ChaCha8Rng::seed_from_u64(seed))?;
        let truth = data.channels.cascaded();

        let visbl = run(&data.dict, &data.protocol, &data.meas, data.noise, &cfg)?.estimate;
        // Both baselines see only the BS observations.
        let model = build_cascaded_model(&data.protocol, &data.dict)?;
        let budget = omp_budget(spec.users, sc.paths_ib, sc.paths_ui, sc.paths_ub, &model);
        let omp = omp_estimate(&data.meas.y, &model, budget)?;
        let ridge = default_ridge(&data.meas.y, &model, data.noise.sigma_b2);
        let ls = ls_estimate(&data.meas.y, &model, ridge)?;

        let row = [nmse_db(&visbl.cascaded, &truth)?, nmse_db(&omp.cascaded, &truth)?, nmse_db(&ls.cascaded, &truth)?];
        println!("{seed:>5} {:>8.2} {:>8.2} {:>8.2}", row[0], row[1], row[2]);
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v / trials as f64;
        }
    }
    println!(" mean {:>8.2} {:>8.2} {:>8.2}", sums[0], sums[1], sums[2]);
    Ok(())
}
