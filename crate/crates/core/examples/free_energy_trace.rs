//! Free energy and mean change per sweep on a small instance.
//!
//! `cargo run --release --example free_energy_trace`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irs_visbl::estimator::{run, StopRule, VisblConfig};
use irs_visbl::trial::TrialSpec;

fn main() -> irs_visbl::Result<()> {
    let spec = TrialSpec { bs_antennas: 4, irs_h: 2, irs_v: 2, users: 2, t: 30, n_a: 1, warmup_off: 4, ..TrialSpec::default() };
    let data = spec.generate(&mut ChaCha8Rng::seed_from_u64(11))?;
    let cfg = VisblConfig { stop: StopRule { max_iters: 40, rel_tol: 1e-10 }, track_free_energy: true, ..VisblConfig::default() };
    let out = run(&data.dict, &data.protocol, &data.meas, data.noise, &cfg)?;

    let fe = &out.trace.free_energy;
    println!("sweep   free energy          step      mean change");
    println!("{:>5} {:>16.6e}", 0, fe[0]);
    for (i, w) in fe.windows(2).enumerate() {
        println!("{:>5} {:>16.6e} {:>12.3e} {:>14.3e}", i + 1, w[1], w[1] - w[0], out.trace.mean_change[i]);
    }
    let rises = fe.windows(2).filter(|w| w[1] > w[0] + 1e-9 * w[0].abs()).count();
    println!("sweeps that raised the free energy: {rises}");
    Ok(())
}
