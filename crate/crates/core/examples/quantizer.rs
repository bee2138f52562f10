//! Low-resolution sensor quantizer: levels, thresholds and distortion.
//!
//! `cargo run --release --example quantizer`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irs_visbl::channel::complex_normal;
use irs_visbl::measurement::{design_quantizer, optimal_step};

fn main() -> irs_visbl::Result<()> {
    let q = design_quantizer(2, 1.0)?;
    println!("2-bit quantizer, unit complex variance");
    println!("  levels     {:?}", q.levels);
    println!("  thresholds {:?}", q.thresholds);
    let cell = q.quantize(num_complex::Complex64::new(0.3, -1.7));
    println!("  0.3 - 1.7i -> {} in [{}, {}) x [{}, {})", cell.z, cell.lo.re, cell.up.re, cell.lo.im, cell.up.im);

    println!("\n bits  c_B      SQNR (dB)");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let samples: Vec<_> = (0..20_000).map(|_| complex_normal(&mut rng, 1.0)).collect();
    for bits in [1, 2, 3, 4, 6, 8, 10, 12] {
        let q = design_quantizer(bits, 1.0)?;
        let err: f64 = samples.iter().map(|&u| (q.quantize(u).z - u).norm_sqr()).sum::<f64>() / samples.len() as f64;
        println!(" {bits:>4}  {:.4}  {:>8.2}", optimal_step(bits), -10.0 * err.log10());
    }
    Ok(())
}
