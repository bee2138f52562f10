//! One Monte-Carlo trial: channels, training protocol and measurements.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{build_dictionaries, draw_scenario, ArrayGeometry, ChannelSet, ScenarioConfig, SteeringDictionary};
use crate::error::Result;
use crate::estimator::Model;
use crate::linalg::from_db10;
use crate::measurement::{
    build_training, design_quantizer, simulate, MeasurementSet, NoiseLevels, Quantizer, TrainingConfig, TrainingProtocol,
};

/// Array sizes and training parameters of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSpec {
    pub bs_antennas: usize,
    pub irs_h: usize,
    pub irs_v: usize,
    /// BS grid size; `0` means `M`.
    pub m_g: usize,
    /// IRS grid size; `0` means `N`.
    pub n_g: usize,
    pub users: usize,
    pub t: usize,
    pub t_c: usize,
    pub n_a: usize,
    /// Sensor switching frequency in switches per slot (`f_sn ≤ 1`).
    pub f_sn: f64,
    pub warmup_off: usize,
    pub bits: u32,
    pub phase_per_slot: bool,
    pub scenario: ScenarioConfig,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            bs_antennas: 16,
            irs_h: 8,
            irs_v: 8,
            m_g: 0,
            n_g: 0,
            users: 4,
            t: 400,
            t_c: 1800,
            n_a: 4,
            f_sn: 1.0,
            warmup_off: 50,
            bits: 4,
            phase_per_slot: true,
            scenario: ScenarioConfig::default(),
        }
    }
}

impl TrialSpec {
    /// Small instance used by tests and examples: `M = 8`, `4 × 4` IRS,
    /// two users, 100 slots.
    pub fn desk() -> Self {
        Self { bs_antennas: 8, irs_h: 4, irs_v: 4, users: 2, t: 100, n_a: 2, warmup_off: 10, ..Self::default() }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.bs_antennas, self.irs_h, self.irs_v)
    }

    pub fn irs_elements(&self) -> usize {
        self.irs_h * self.irs_v
    }

    pub fn grid_sizes(&self) -> (usize, usize) {
        let m_g = if self.m_g == 0 { self.bs_antennas } else { self.m_g };
        let n_g = if self.n_g == 0 { self.irs_elements() } else { self.n_g };
        (m_g, n_g)
    }

    pub fn switch_period(&self) -> Result<usize> {
        if !(self.f_sn > 0.0 && self.f_sn <= 1.0) {
            return Err(crate::error::config_err(format!("f_sn must lie in (0, 1], got {}", self.f_sn)));
        }
        Ok((1.0 / self.f_sn).round().max(1.0) as usize)
    }

    pub fn training_config(&self) -> Result<TrainingConfig> {
        Ok(TrainingConfig {
            users: self.users,
            irs_elements: self.irs_elements(),
            t: self.t,
            t_c: self.t_c,
            n_a: self.n_a,
            switch_period: self.switch_period()?,
            warmup_off: self.warmup_off,
            tx_power_w: self.scenario.tx_power_w(),
            phase_per_slot: self.phase_per_slot,
        })
    }

    pub fn noise(&self) -> NoiseLevels {
        let p = self.scenario.noise_power_w();
        NoiseLevels { sigma_b2: p, sigma_i2: p }
    }

    /// Sensor quantizer scaled to the average received power per element,
    /// `Σ_k P N / PL + σ_I²`, with the path loss taken at the user-circle centre.
    pub fn quantizer(&self) -> Result<Quantizer> {
        let pl = from_db10(self.scenario.mean_ue_irs_path_loss_db());
        let power = self.users as f64 * self.scenario.tx_power_w() * self.irs_elements() as f64 / pl + self.noise().sigma_i2;
        design_quantizer(self.bits, power.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.training_config()?.validate()?;
        self.quantizer()?;
        let (m_g, n_g) = self.grid_sizes();
        build_dictionaries(self.geometry()?, m_g, n_g)?;
        Ok(())
    }

    /// Draw channels, then the protocol, then the measurements.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialData> {
        let (m_g, n_g) = self.grid_sizes();
        let dict = build_dictionaries(self.geometry()?, m_g, n_g)?;
        let channels = draw_scenario(rng, &self.scenario, &dict, self.users, self.scenario.on_grid)?;
        let protocol = build_training(rng, &self.training_config()?)?;
        let quantizer = self.quantizer()?;
        let noise = self.noise();
        let meas = simulate(rng, &channels, &protocol, noise, &quantizer)?;
        Ok(TrialData { dict, channels, protocol, meas, noise, quantizer })
    }
}

#[derive(Debug, Clone)]
pub struct TrialData {
    pub dict: SteeringDictionary,
    pub channels: ChannelSet,
    pub protocol: TrainingProtocol,
    pub meas: MeasurementSet,
    pub noise: NoiseLevels,
    pub quantizer: Quantizer,
}

impl TrialData {
    pub fn model(&self) -> Result<Model> {
        Model::new(&self.dict, &self.protocol, &self.meas, self.noise)
    }
}
