//! One trial end to end: simulate, run VI-SBL, score each link.
//!
//! `cargo run --release --example estimate_single_trial [seed]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irs_visbl::estimator::{run, PartitionSpec, VisblConfig};
use irs_visbl::evaluation::nmse_db;
use irs_visbl::trial::TrialSpec;

fn main() -> irs_visbl::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let spec = TrialSpec::desk();
    let data = spec.generate(&mut ChaCha8Rng::seed_from_u64(seed))?;
    println!(
        "M = {}, N = {}, K = {}, T = {}, {} sensors at {} bits, {} active sensor samples",
        spec.bs_antennas,
        spec.irs_elements(),
        spec.users,
        spec.t,
        spec.n_a,
        spec.bits,
        data.protocol.omega.sum()
    );

    let cfg = VisblConfig { partition: PartitionSpec::unpartitioned(), ..VisblConfig::default() };
    let start = std::time::Instant::now();
    let out = run(&data.dict, &data.protocol, &data.meas, data.noise, &cfg)?;
    println!(
        "{} sweeps, converged = {}, {:.2} s",
        out.trace.iterations,
        out.trace.converged,
        start.elapsed().as_secs_f64()
    );

    let est = &out.estimate;
    let ch = &data.channels;
    println!("NMSE F  {:>8.2} dB", nmse_db(est.f_bar.as_ref().unwrap(), &ch.f_bar)?);
    println!("NMSE G  {:>8.2} dB", nmse_db(est.g_bar.as_ref().unwrap(), &ch.g_bar)?);
    println!("NMSE H  {:>8.2} dB", nmse_db(&est.h_bar, &ch.h_bar)?);
    println!("cascade {:>8.2} dB", nmse_db(&est.cascaded, &ch.cascaded())?);
    Ok(())
}
