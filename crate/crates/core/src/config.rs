//! Human-readable run configuration.
//!
//! The file uses plain (non-angular) Hz for every frequency and microseconds
//! for ramp times, matching lab conventions; conversion to rad/s and seconds
//! happens here, once.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::{
    AxialSchedule, CoolingModel, ForceField, IntegratorConfig, IntegratorScheme, QuenchSetup,
};
use crate::error::{KzmError, Result};
use crate::model::{IonSpecies, RampProtocol, RfMode, TrapParameters};
use crate::sweep::SweepPlan;

fn default_species() -> String {
    "ca40".into()
}
fn default_n_ions() -> usize {
    16
}
fn default_omega_weak_hz() -> f64 {
    1394.1e3
}
fn default_anisotropy() -> f64 {
    1.03
}
fn default_drive_hz() -> f64 {
    22.0e6
}
fn default_rf_mode() -> RfMode {
    RfMode::Pseudopotential
}
fn default_v_start() -> f64 {
    (167.0 / 344.0) * (167.0 / 344.0)
}
fn default_v_end() -> f64 {
    1.0
}
fn default_tau_us() -> f64 {
    1.0
}
fn default_settle_us() -> f64 {
    100.0
}
fn default_calibration_a() -> f64 {
    2.0 * PI * 344.0e3
}
fn default_friction_hz() -> f64 {
    5.0e3
}
fn default_temperature_mk() -> f64 {
    0.54
}
fn default_true() -> bool {
    true
}
fn default_trajectories() -> usize {
    200
}
fn default_seed() -> u64 {
    1
}
fn default_anisotropy_values() -> Vec<f64> {
    vec![1.03]
}

/// Laser-cooling section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingConfig {
    /// Friction rate eta (1/s, plain Hz).
    #[serde(default = "default_friction_hz")]
    pub friction_hz: f64,
    /// Doppler temperature, mK.
    #[serde(default = "default_temperature_mk")]
    pub temperature_mk: f64,
    /// Disable to integrate pure Hamiltonian dynamics.
    #[serde(default = "default_true")]
    pub enabled: bool,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        Self {
            friction_hz: default_friction_hz(),
            temperature_mk: default_temperature_mk(),
            enabled: true,
        }
    }
}

/// Integrator section. `dt_ns = 0` selects the mode-appropriate default
/// (5 ns pseudopotential, 0.5 ns full RF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub dt_ns: f64,
    /// Record a snapshot every this many steps; 0 keeps only what the
    /// defect diagnostics need.
    #[serde(default)]
    pub sample_stride: usize,
}

/// Sweep section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Quench timescales, us. Empty selects the default 8-point grid
    /// spanning 0.5-4.0 us.
    #[serde(default)]
    pub tau_us_values: Vec<f64>,
    #[serde(default = "default_trajectories")]
    pub trajectories_per_point: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_anisotropy_values")]
    pub anisotropy_values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            tau_us_values: Vec::new(),
            trajectories_per_point: default_trajectories(),
            master_seed: default_seed(),
            anisotropy_values: default_anisotropy_values(),
        }
    }
}

/// Complete run configuration as parsed from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_species")]
    pub species: String,
    #[serde(default = "default_n_ions")]
    pub n_ions: usize,
    /// Weak radial secular frequency, Hz.
    #[serde(default = "default_omega_weak_hz")]
    pub omega_weak_hz: f64,
    #[serde(default = "default_anisotropy")]
    pub anisotropy: f64,
    /// RF drive frequency, Hz.
    #[serde(default = "default_drive_hz")]
    pub drive_hz: f64,
    #[serde(default = "default_rf_mode")]
    pub rf_mode: RfMode,
    #[serde(default = "default_v_start")]
    pub v_start: f64,
    #[serde(default = "default_v_end")]
    pub v_end: f64,
    #[serde(default = "default_tau_us")]
    pub tau_us: f64,
    /// Sigmoid midpoint, us; 0 selects 10 tau.
    #[serde(default)]
    pub t0_us: f64,
    #[serde(default = "default_settle_us")]
    pub settle_us: f64,
    /// Axial calibration a with omega_ax = a sqrt(V), rad/s per sqrt(V).
    #[serde(default = "default_calibration_a")]
    pub calibration_a: f64,
    #[serde(default)]
    pub cooling: CoolingConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config must be valid")
    }
}

impl RunConfig {
    /// Parse from config-file text. Unknown keys are rejected so typos
    /// fail loudly rather than silently taking defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| KzmError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ion_species()?;
        if self.n_ions < 2 {
            return Err(KzmError::Config("n_ions must be at least 2".into()));
        }
        let trap = self.trap()?;
        trap.validate()?;
        let ramp = self.ramp()?;
        ramp.validate()?;
        self.cooling_model()?.validate(trap.omega_weak)?;
        let field = ForceField::new(self.ion_species()?, &trap, AxialSchedule::Ramp(ramp))?;
        self.integrator_config()?.validate(&field)?;
        Ok(())
    }

    pub fn ion_species(&self) -> Result<IonSpecies> {
        match self.species.to_ascii_lowercase().as_str() {
            "ca40" | "40ca+" | "ca" => Ok(IonSpecies::ca40()),
            other => Err(KzmError::Config(format!(
                "unknown species '{other}' (supported: ca40)"
            ))),
        }
    }

    pub fn trap(&self) -> Result<TrapParameters> {
        if !(self.omega_weak_hz > 0.0) {
            return Err(KzmError::Config("omega_weak_hz must be positive".into()));
        }
        Ok(TrapParameters {
            omega_weak: 2.0 * PI * self.omega_weak_hz,
            anisotropy: self.anisotropy,
            drive_frequency: 2.0 * PI * self.drive_hz,
            rf_mode: self.rf_mode,
            axial_calibration: self.calibration_a,
        })
    }

    pub fn ramp(&self) -> Result<RampProtocol> {
        if !(self.tau_us > 0.0) {
            return Err(KzmError::Config("tau_us must be positive".into()));
        }
        let tau = self.tau_us * 1e-6;
        let t0 = if self.t0_us > 0.0 {
            self.t0_us * 1e-6
        } else {
            10.0 * tau
        };
        let settle = self.settle_us * 1e-6;
        Ok(RampProtocol {
            v_start: self.v_start,
            v_end: self.v_end,
            t0,
            tau,
            settle_time: settle,
            total_duration: 2.0 * t0 + settle,
        })
    }

    pub fn cooling_model(&self) -> Result<CoolingModel> {
        if !self.cooling.enabled {
            return Ok(CoolingModel::off());
        }
        if !(self.cooling.friction_hz >= 0.0 && self.cooling.temperature_mk >= 0.0) {
            return Err(KzmError::Config(
                "cooling rates and temperature must be non-negative".into(),
            ));
        }
        Ok(CoolingModel {
            friction_rate: 2.0 * PI * self.cooling.friction_hz,
            temperature: self.cooling.temperature_mk * 1e-3,
        })
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig> {
        let mut cfg = match self.rf_mode {
            RfMode::Pseudopotential => IntegratorConfig::pseudopotential_default(),
            RfMode::FullRf => IntegratorConfig::full_rf_default(),
        };
        if self.integrator.dt_ns > 0.0 {
            cfg.dt = self.integrator.dt_ns * 1e-9;
        } else if self.integrator.dt_ns < 0.0 {
            return Err(KzmError::Config("dt_ns must be non-negative".into()));
        }
        cfg.sample_stride = self.integrator.sample_stride;
        cfg.scheme = IntegratorScheme::StochasticSplitting;
        Ok(cfg)
    }

    pub fn quench_setup(&self) -> Result<QuenchSetup> {
        Ok(QuenchSetup {
            n_ions: self.n_ions,
            species: self.ion_species()?,
            trap: self.trap()?,
            ramp: self.ramp()?,
            cooling: self.cooling_model()?,
            integrator: self.integrator_config()?,
        })
    }

    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        let mut plan = SweepPlan::experiment_default(self.sweep.master_seed);
        if !self.sweep.tau_us_values.is_empty() {
            plan.tau_values = self.sweep.tau_us_values.iter().map(|t| t * 1e-6).collect();
        }
        plan.trajectories_per_point = self.sweep.trajectories_per_point;
        plan.n_ions = self.n_ions;
        plan.species = self.ion_species()?;
        plan.trap = self.trap()?;
        plan.ramp_template = self.ramp()?;
        plan.cooling = self.cooling_model()?;
        plan.integrator = self.integrator_config()?;
        plan.anisotropy_values = self.sweep.anisotropy_values.clone();
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_config_gives_experiment_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        let trap = cfg.trap().unwrap();
        let reference = TrapParameters::experiment_default();
        assert_relative_eq!(trap.omega_weak, reference.omega_weak, max_relative = 1e-12);
        assert_eq!(trap.rf_mode, RfMode::Pseudopotential);
        assert_eq!(cfg.n_ions, 16);
        let ramp = cfg.ramp().unwrap();
        assert_relative_eq!(ramp.tau, 1e-6, max_relative = 1e-12);
        assert_relative_eq!(ramp.t0, 10e-6, max_relative = 1e-12);
        assert_relative_eq!(ramp.settle_time, 100e-6, max_relative = 1e-12);
    }

    #[test]
    fn frequencies_are_plain_hz() {
        let cfg = RunConfig::from_toml("omega_weak_hz = 1.0e6").unwrap();
        assert_relative_eq!(
            cfg.trap().unwrap().omega_weak,
            2.0 * PI * 1.0e6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml("omega_weka_hz = 1.0e6").unwrap_err();
        assert!(err.to_string().contains("omega_weka_hz"));
    }

    #[test]
    fn explicit_t0_respected() {
        let cfg = RunConfig::from_toml("tau_us = 2.0\nt0_us = 30.0").unwrap();
        let ramp = cfg.ramp().unwrap();
        assert_relative_eq!(ramp.t0, 30e-6, max_relative = 1e-12);
        assert_relative_eq!(
            ramp.total_duration,
            60e-6 + 100e-6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cooling_disabled() {
        let cfg = RunConfig::from_toml("[cooling]\nenabled = false").unwrap();
        let cm = cfg.cooling_model().unwrap();
        assert_eq!(cm.friction_rate, 0.0);
        assert_eq!(cm.temperature, 0.0);
    }

    #[test]
    fn sweep_plan_from_section() {
        let cfg = RunConfig::from_toml(
            "[sweep]\ntau_us_values = [0.5, 1.0, 2.0]\ntrajectories_per_point = 10\nmaster_seed = 7",
        )
        .unwrap();
        let plan = cfg.sweep_plan().unwrap();
        assert_eq!(plan.tau_values.len(), 3);
        assert_relative_eq!(plan.tau_values[2], 2e-6, max_relative = 1e-12);
        assert_eq!(plan.trajectories_per_point, 10);
        assert_eq!(plan.master_seed, 7);
    }

    #[test]
    fn bad_species_rejected() {
        assert!(RunConfig::from_toml("species = \"yb171\"").is_err());
    }

    #[test]
    fn round_trip_serialization() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
