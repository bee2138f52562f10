//! Power budget of the BS plus sensors, and the resulting energy efficiency.
//!
//! `cargo run --release --example power_and_ee`

use irs_visbl::evaluation::{energy_efficiency, power_total, PowerModel, PowerPoint};

fn main() -> irs_visbl::Result<()> {
    let pm = PowerModel::default();
    println!("ADC power per converter");
    for bits in [1, 2, 4, 8, 10] {
        println!("  B = {bits:>2}: {:>9.4} mW", pm.adc(bits) * 1e3);
    }
    println!("BS with 16 antennas: {:.4} W\n", pm.bs(16));

    // Spectral efficiency held fixed to isolate the power side.
    let se = 20.0;
    println!(" N_a   B   power (W)   EE (Mbit/J)");
    for n_a in [0, 2, 4, 8, 16] {
        for bits in [2, 4, 8] {
            if n_a == 0 && bits != 4 {
                continue;
            }
            let op = PowerPoint { bs_antennas: 16, n_a, bits, bandwidth: 80e6, t: 400, t_c: 1800 };
            let p = power_total(&pm, &op);
            let ee = energy_efficiency(se, p, op.bandwidth)?;
            println!(" {n_a:>3} {bits:>3} {p:>10.4} {:>12.2}", ee / 1e6);
        }
    }
    Ok(())
}
