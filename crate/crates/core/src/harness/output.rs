//! Result files: metrics CSV, run manifest and a plotting script.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::RunResult;
use crate::error::{Error, Result};
use crate::evaluation::MetricRecord;

pub const CSV_HEADER: [&str; 12] = [
    "sweep_name",
    "sweep_value",
    "trial",
    "estimator",
    "nmse_f_db",
    "nmse_g_db",
    "nmse_h_db",
    "nmse_casc_db",
    "se",
    "power_w",
    "ee",
    "seed",
];

fn db(x: f64) -> String {
    format!("{x:.4}")
}

/// Text fields of one row; missing link estimates are left empty.
pub fn csv_fields(r: &MetricRecord) -> [String; 12] {
    [
        r.sweep_name.clone(),
        format!("{}", r.sweep_value),
        r.trial.to_string(),
        r.estimator.clone(),
        r.nmse_f_db.map(db).unwrap_or_default(),
        r.nmse_g_db.map(db).unwrap_or_default(),
        db(r.nmse_h_db),
        db(r.nmse_casc_db),
        format!("{:.6}", r.se),
        format!("{:.6}", r.power_w),
        format!("{:.6e}", r.ee),
        r.seed.to_string(),
    ]
}

pub fn write_csv<W: Write>(out: W, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(csv_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Summary written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub rows: usize,
    pub failures: usize,
    pub wall_time_s: f64,
    pub csv: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, res: &RunResult, wall_time_s: f64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            rows: res.records.len(),
            failures: res.failures.len(),
            wall_time_s,
            csv: METRICS_FILE.to_string(),
            config: cfg.clone(),
        }
    }
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const PLOT_FILE: &str = "plot.py";

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Trial-mean NMSE against the sweep value, one line per estimator.
import csv
import math
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "metrics.csv"
columns = ["nmse_f_db", "nmse_g_db", "nmse_h_db", "nmse_casc_db"]
acc = defaultdict(list)
axis = "sweep_value"
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        axis = row["sweep_name"]
        for c in columns:
            if row[c] and math.isfinite(float(row[c])):
                acc[(row["estimator"], c, float(row["sweep_value"]))].append(float(row[c]))

fig, axes = plt.subplots(1, len(columns), figsize=(4 * len(columns), 3.5))
for ax, c in zip(axes, columns):
    for est in sorted({k[0] for k in acc}):
        pts = sorted((x, sum(v) / len(v)) for (e, cc, x), v in acc.items() if e == est and cc == c)
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=est)
    ax.set_xlabel(axis)
    ax.set_title(c)
    ax.grid(True)
axes[0].set_ylabel("NMSE (dB)")
axes[-1].legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
"#;

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub metrics: PathBuf,
    pub manifest: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Write the CSV, manifest and (if enabled) the plot script into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, res: &RunResult, wall_time_s: f64) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir)?;
    let metrics = dir.join(METRICS_FILE);
    write_csv(std::fs::File::create(&metrics)?, &res.records)?;
    let manifest = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&Manifest::new(cfg, res, wall_time_s)).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&manifest, text)?;
    let plot = if cfg.plot_script {
        let p = dir.join(PLOT_FILE);
        std::fs::write(&p, PLOT_SCRIPT)?;
        Some(p)
    } else {
        None
    };
    Ok(OutputFiles { metrics, manifest, plot })
}
