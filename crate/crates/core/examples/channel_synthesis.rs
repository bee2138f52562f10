//! Draw the three links of one desk-scale scenario and inspect them.
//!
//! `cargo run --release --example channel_synthesis`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irs_visbl::channel::{build_dictionaries, draw_scenario};
use irs_visbl::trial::TrialSpec;

fn main() -> irs_visbl::Result<()> {
    let spec = TrialSpec::desk();
    let (m_g, n_g) = spec.grid_sizes();
    let dict = build_dictionaries(spec.geometry()?, m_g, n_g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for on_grid in [true, false] {
        let ch = draw_scenario(&mut rng, &spec.scenario, &dict, spec.users, on_grid)?;
        println!("on_grid = {on_grid}");
        for (name, m) in [("F (UE-IRS)", &ch.f_bar), ("G (IRS-BS)", &ch.g_bar), ("H (UE-BS)", &ch.h_bar)] {
            let per_entry = m.norm_squared() / (m.nrows() * m.ncols()) as f64;
            println!("  {name:<11} {:>2} x {:<2} mean |entry|^2 = {per_entry:.3e}", m.nrows(), m.ncols());
        }
        // On-grid draws come with their angular representation.
        if let Some(g) = &ch.g {
            let support = g.iter().filter(|z| z.norm() > 1e-12 * g.norm()).count();
            println!("  angular G has {support} nonzero entries out of {}", g.len());
        }
        println!("  cascaded channel: {} x {}", ch.cascaded().nrows(), ch.cascaded().ncols());
    }
    Ok(())
}
