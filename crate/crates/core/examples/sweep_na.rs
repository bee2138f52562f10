//! Sweep the number of active sensors through the experiment harness and
//! write the CSV, manifest and plot script.
//!
//! `cargo run --release --example sweep_na [trials] [out_dir]`

use irs_visbl::harness::{run_to_dir, ExperimentConfig};

fn main() -> irs_visbl::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().unwrap_or_else(|| "4".into());
    let out = args.next().unwrap_or_else(|| "results/sweep_na".into());

    let overrides: Vec<String> = [
        "geometry.bs_antennas=8",
        "geometry.irs_h=8",
        "geometry.irs_v=4",
        "training.users=2",
        "training.t=100",
        "training.warmup_off=10",
        "visbl.partition.s_g=1",
        "estimators=[\"visbl\"]",
        "sweep.name=\"N_a\"",
        "sweep.values=[2, 4, 8, 16]",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([format!("trials={trials}")])
    .collect();
    let cfg = ExperimentConfig::from_toml_str("", &overrides)?;
    let (res, files) = run_to_dir(&cfg, out.as_ref())?;

    println!(" N_a      F       G       H    cascaded   (trial-mean NMSE, dB)");
    for v in &cfg.sweep.as_ref().unwrap().values {
        let rows: Vec<_> = res.records.iter().filter(|r| r.sweep_value == *v).collect();
        let mean = |f: &dyn Fn(&irs_visbl::evaluation::MetricRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
        println!(
            "{v:>4} {:>7.2} {:>7.2} {:>7.2} {:>9.2}",
            mean(&|r| r.nmse_f_db.unwrap()),
            mean(&|r| r.nmse_g_db.unwrap()),
            mean(&|r| r.nmse_h_db),
            mean(&|r| r.nmse_casc_db)
        );
    }
    println!("wrote {}", files.metrics.display());
    Ok(())
}
