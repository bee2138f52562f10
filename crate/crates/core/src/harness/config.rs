//! Experiment configuration: TOML sections, dotted-key overrides, validation.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::estimator::{block_ranges, VisblConfig};
use crate::evaluation::PowerModel;
use crate::trial::TrialSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub bs_antennas: usize,
    pub irs_h: usize,
    pub irs_v: usize,
    /// BS grid size; `0` means `bs_antennas`.
    pub m_g: usize,
    /// IRS grid size; `0` means `irs_h · irs_v`.
    pub n_g: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub users: usize,
    pub t: usize,
    pub t_c: usize,
    pub warmup_off: usize,
    pub f_sn: f64,
    pub n_a: usize,
    pub bits: u32,
    pub phase_per_slot: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let s = TrialSpec::default();
        Self { bs_antennas: s.bs_antennas, irs_h: s.irs_h, irs_v: s.irs_v, m_g: s.m_g, n_g: s.n_g }
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        let s = TrialSpec::default();
        Self {
            users: s.users,
            t: s.t,
            t_c: s.t_c,
            warmup_off: s.warmup_off,
            f_sn: s.f_sn,
            n_a: s.n_a,
            bits: s.bits,
            phase_per_slot: s.phase_per_slot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// OMP support size; `0` picks it from the path counts.
    pub omp_budget: usize,
    /// Ridge weight; negative picks it from the data and noise level.
    pub ridge: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { omp_budget: 0, ridge: -1.0 }
    }
}

/// Parameter varied across sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "tx_power_dbm")]
    TxPowerDbm,
    #[serde(rename = "T", alias = "t")]
    T,
    #[serde(rename = "N_a", alias = "n_a")]
    NA,
    #[serde(rename = "B", alias = "bits")]
    B,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::TxPowerDbm => "tx_power_dbm",
            SweepAxis::T => "T",
            SweepAxis::NA => "N_a",
            SweepAxis::B => "B",
        }
    }

    fn is_integer(&self) -> bool {
        !matches!(self, SweepAxis::TxPowerDbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Visbl,
    Omp,
    Ls,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Visbl => "visbl",
            EstimatorKind::Omp => "omp",
            EstimatorKind::Ls => "ls",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub estimators: Vec<EstimatorKind>,
    pub output_dir: PathBuf,
    /// Write `plot.py` next to the CSV.
    pub plot_script: bool,
    pub scenario: ScenarioConfig,
    pub geometry: GeometryConfig,
    pub training: TrainingSection,
    pub visbl: VisblConfig,
    pub baselines: BaselineConfig,
    pub power: PowerModel,
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 20,
            estimators: vec![EstimatorKind::Visbl, EstimatorKind::Omp, EstimatorKind::Ls],
            output_dir: PathBuf::from("results"),
            plot_script: true,
            scenario: ScenarioConfig::default(),
            geometry: GeometryConfig::default(),
            training: TrainingSection::default(),
            visbl: VisblConfig::default(),
            baselines: BaselineConfig::default(),
            power: PowerModel::default(),
            sweep: None,
        }
    }
}

fn at(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {e}"))
}

fn section<T: DeserializeOwned + Default>(table: &toml::Table, key: &str) -> Result<T> {
    match table.get(key) {
        None => Ok(T::default()),
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| at(key, e.message())),
    }
}

fn field<T: DeserializeOwned>(table: &toml::Table, key: &str, default: T) -> Result<T> {
    match table.get(key) {
        None => Ok(default),
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| at(key, e.message())),
    }
}

/// Parse an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `a.b.c=value` to a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for (i, p) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{}: not a table", parts[..=i].join("."))))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Build from a TOML table; unknown keys are rejected with their path.
    pub fn from_table(table: &toml::Table) -> Result<Self> {
        const KEYS: [&str; 12] = [
            "seed",
            "trials",
            "estimators",
            "output_dir",
            "plot_script",
            "scenario",
            "geometry",
            "training",
            "visbl",
            "baselines",
            "power",
            "sweep",
        ];
        if let Some(bad) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("{bad}: unknown key")));
        }
        let d = Self::default();
        let cfg = Self {
            seed: field(table, "seed", d.seed)?,
            trials: field(table, "trials", d.trials)?,
            estimators: field(table, "estimators", d.estimators)?,
            output_dir: field(table, "output_dir", d.output_dir)?,
            plot_script: field(table, "plot_script", d.plot_script)?,
            scenario: section(table, "scenario")?,
            geometry: section(table, "geometry")?,
            training: section(table, "training")?,
            visbl: section(table, "visbl")?,
            baselines: section(table, "baselines")?,
            power: section(table, "power")?,
            sweep: match table.get("sweep") {
                None => None,
                Some(v) => Some(v.clone().try_into().map_err(|e: toml::de::Error| at("sweep", e.message()))?),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(&table)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    /// Trial description at the base point (before any sweep value).
    pub fn trial_spec(&self) -> TrialSpec {
        let (g, t) = (&self.geometry, &self.training);
        TrialSpec {
            bs_antennas: g.bs_antennas,
            irs_h: g.irs_h,
            irs_v: g.irs_v,
            m_g: g.m_g,
            n_g: g.n_g,
            users: t.users,
            t: t.t,
            t_c: t.t_c,
            n_a: t.n_a,
            f_sn: t.f_sn,
            warmup_off: t.warmup_off,
            bits: t.bits,
            phase_per_slot: t.phase_per_slot,
            scenario: self.scenario.clone(),
        }
    }

    /// Sweep points as `(axis name, value)`; a config without a sweep has one point.
    pub fn points(&self) -> Vec<(String, f64)> {
        match &self.sweep {
            None => vec![("none".to_string(), 0.0)],
            Some(s) => s.values.iter().map(|v| (s.name.name().to_string(), *v)).collect(),
        }
    }

    /// Trial description at one sweep value.
    pub fn spec_at(&self, value: f64) -> TrialSpec {
        let mut spec = self.trial_spec();
        if let Some(s) = &self.sweep {
            match s.name {
                SweepAxis::TxPowerDbm => spec.scenario.tx_power_dbm = value,
                SweepAxis::T => spec.t = value as usize,
                SweepAxis::NA => spec.n_a = value as usize,
                SweepAxis::B => spec.bits = value as u32,
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(at("trials", "must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(at("estimators", "list is empty"));
        }
        if self.training.t > self.training.t_c {
            return Err(at("training.t_c", format!("T_c = {} is smaller than T = {}", self.training.t_c, self.training.t)));
        }
        self.visbl.validate().map_err(|e| at("visbl", e))?;
        self.power.validate().map_err(|e| at("power", e))?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(at("sweep.values", "list is empty"));
            }
            for v in &s.values {
                let bad_int = s.name.is_integer() && (v.fract() != 0.0 || *v < 0.0);
                if !v.is_finite() || bad_int {
                    return Err(at("sweep.values", format!("{v} is not a valid {} value", s.name.name())));
                }
            }
        }
        for (_, v) in self.points() {
            let spec = self.spec_at(v);
            spec.validate().map_err(|e| at("training", e))?;
            let (m_g, n_g) = spec.grid_sizes();
            let p = &self.visbl.partition;
            for (len, s) in [(n_g * spec.users, p.s_f), (m_g * n_g, p.s_g), (m_g * spec.users, p.s_h)] {
                block_ranges(len, s).map_err(|e| at("visbl.partition", e))?;
            }
        }
        Ok(())
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_full_defaults() {
        let c = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.geometry.bs_antennas, 16);
        assert_eq!((c.geometry.irs_h, c.geometry.irs_v), (8, 8));
        assert_eq!(c.training.users, 4);
        assert_eq!(c.training.n_a, 4);
        assert_eq!(c.training.bits, 4);
        assert_eq!(c.training.t, 400);
        assert_eq!(c.training.t_c, 1800);
        assert_eq!(c.training.warmup_off, 50);
        assert_eq!(c.training.f_sn, 1.0);
        assert_eq!(c.trial_spec().grid_sizes(), (16, 64));
        assert_eq!((c.visbl.hyper.a, c.visbl.hyper.b), (1e-6, 1e-6));
        assert_eq!((c.visbl.partition.s_f, c.visbl.partition.s_g, c.visbl.partition.s_h), (1, 8, 1));
        assert_eq!(c.scenario.tx_power_dbm, 23.0);
        assert_eq!(c.scenario.bandwidth_hz, 80e6);
        assert_eq!(c.scenario.noise_figure_db, 7.0);
        assert_eq!(c.scenario.noise_density_dbm_hz, -174.0);
    }

    #[test]
    fn passive_only_override_is_accepted() {
        let c = ExperimentConfig::from_toml_str("", &["training.n_a=0".into()]).unwrap();
        assert_eq!(c.training.n_a, 0);
    }

    #[test]
    fn short_coherence_block_is_rejected_with_key() {
        let err = ExperimentConfig::from_toml_str("", &["training.t_c=100".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("training.t_c"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = ExperimentConfig::from_toml_str("[training]\nfoo = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("training") && err.to_string().contains("foo"), "{err}");
        let err = ExperimentConfig::from_toml_str("bogus = 2\n", &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn sweep_axis_names_and_aliases() {
        let c = ExperimentConfig::from_toml_str("[sweep]\nname = \"N_a\"\nvalues = [2, 4]\n", &[]).unwrap();
        assert_eq!(c.sweep.as_ref().unwrap().name, SweepAxis::NA);
        let c = ExperimentConfig::from_toml_str("[sweep]\nname = \"bits\"\nvalues = [2]\n", &[]).unwrap();
        assert_eq!(c.spec_at(2.0).bits, 2);
        assert!(ExperimentConfig::from_toml_str("[sweep]\nname = \"M\"\nvalues = [2]\n", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("[sweep]\nname = \"T\"\nvalues = [2.5]\n", &[]).is_err());
    }

    #[test]
    fn overrides_parse_values_and_nest() {
        let c = ExperimentConfig::from_toml_str(
            "",
            &["scenario.tx_power_dbm=10.5".into(), "sweep.name=B".into(), "sweep.values=[2,4]".into(), "trials=3".into()],
        )
        .unwrap();
        assert_eq!(c.scenario.tx_power_dbm, 10.5);
        assert_eq!(c.sweep.unwrap().values, vec![2.0, 4.0]);
        assert_eq!(c.trials, 3);
        assert!(ExperimentConfig::from_toml_str("", &["nokey".into()]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let round: ExperimentConfig = toml::from_str(&a.canonical()).unwrap();
        assert_eq!(round, a);
    }
}
