//! Splitting integrator: symmetric deterministic kicks and drift around an
//! exact Ornstein-Uhlenbeck friction-diffusion map.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{KzmError, Result};
use crate::model::RfMode;

use super::forces::ForceField;
use super::quench::SimState;

/// Constant-friction Langevin cooling model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingModel {
    /// Friction rate eta, 1/s.
    pub friction_rate: f64,
    /// Temperature, K (sets diffusion by fluctuation-dissipation).
    pub temperature: f64,
}

impl CoolingModel {
    /// Doppler-cooling defaults for Ca-40: eta = 2pi * 5 kHz, T = 0.54 mK.
    pub fn doppler_default() -> Self {
        Self {
            friction_rate: 2.0 * std::f64::consts::PI * 5e3,
            temperature: 0.54e-3,
        }
    }

    pub fn off() -> Self {
        Self {
            friction_rate: 0.0,
            temperature: 0.0,
        }
    }

    pub fn validate(&self, omega_weak: f64) -> Result<()> {
        if self.friction_rate < 0.0 || self.temperature < 0.0 {
            return Err(KzmError::Config(
                "cooling requires eta >= 0 and T >= 0".into(),
            ));
        }
        if self.friction_rate >= omega_weak / 10.0 {
            return Err(KzmError::Config(format!(
                "underdamped regime violated: eta = {:.3e} >= omega_weak/10",
                self.friction_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorScheme {
    DeterministicVerlet,
    StochasticSplitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Time step, s.
    pub dt: f64,
    pub scheme: IntegratorScheme,
    /// Steps between recorded snapshots; 0 disables recording.
    pub sample_stride: usize,
}

impl IntegratorConfig {
    /// Default pseudopotential step: 5 ns.
    pub fn pseudopotential_default() -> Self {
        Self {
            dt: 5e-9,
            scheme: IntegratorScheme::StochasticSplitting,
            sample_stride: 0,
        }
    }

    /// Default full-RF step: 0.5 ns (about 91 steps per 22 MHz RF period).
    pub fn full_rf_default() -> Self {
        Self {
            dt: 0.5e-9,
            scheme: IntegratorScheme::StochasticSplitting,
            sample_stride: 0,
        }
    }

    pub fn validate(&self, field: &ForceField) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(KzmError::Config("dt must be positive".into()));
        }
        match field.trap().rf_mode {
            RfMode::Pseudopotential => {
                if self.dt * field.omega_max() > 0.1 {
                    return Err(KzmError::Config(format!(
                        "pseudopotential stability bound violated: dt*omega_max = {:.3}",
                        self.dt * field.omega_max()
                    )));
                }
            }
            RfMode::FullRf => {
                if self.dt * field.trap().drive_frequency > 0.15 {
                    return Err(KzmError::Config(format!(
                        "full-RF stability bound violated: dt*Omega = {:.3}",
                        self.dt * field.trap().drive_frequency
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Scaled thermostat coefficients, precomputed once per run.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OuMap {
    /// e^{-eta dt}
    pub c1: f64,
    /// sqrt(kT/m (1 - e^{-2 eta dt})) in scaled velocity units.
    pub c2: f64,
}

impl OuMap {
    pub fn new(eta_scaled: f64, kt_scaled: f64, dt_scaled: f64) -> Self {
        let c1 = (-eta_scaled * dt_scaled).exp();
        let c2 = (kt_scaled * (1.0 - c1 * c1)).max(0.0).sqrt();
        Self { c1, c2 }
    }
}

/// One step of the splitting scheme on scaled state arrays. `acc` must hold
/// the accelerations at (`pos`, `t`) on entry and holds the accelerations at
/// the new time on exit. Returns the minimum pair distance seen.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_scaled(
    pos: &mut [[f64; 3]],
    vel: &mut [[f64; 3]],
    acc: &mut [[f64; 3]],
    t: &mut f64,
    dt: f64,
    field: &ForceField,
    ou: Option<&OuMap>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let half = 0.5 * dt;
    for (v, a) in vel.iter_mut().zip(acc.iter()) {
        v[0] += half * a[0];
        v[1] += half * a[1];
        v[2] += half * a[2];
    }
    for (p, v) in pos.iter_mut().zip(vel.iter()) {
        p[0] += dt * v[0];
        p[1] += dt * v[1];
        p[2] += dt * v[2];
    }
    if let Some(m) = ou {
        if m.c2 > 0.0 {
            for v in vel.iter_mut() {
                for c in v.iter_mut() {
                    let xi: f64 = rng.sample(StandardNormal);
                    *c = m.c1 * *c + m.c2 * xi;
                }
            }
        } else if m.c1 < 1.0 {
            for v in vel.iter_mut() {
                for c in v.iter_mut() {
                    *c *= m.c1;
                }
            }
        }
    }
    *t += dt;
    let min_r = field.accelerations(pos, *t, acc)?;
    for (v, a) in vel.iter_mut().zip(acc.iter()) {
        v[0] += half * a[0];
        v[1] += half * a[1];
        v[2] += half * a[2];
    }
    Ok(min_r)
}

pub(crate) fn check_finite(pos: &[[f64; 3]], vel: &[[f64; 3]], t_si: f64) -> Result<()> {
    for (i, (p, v)) in pos.iter().zip(vel.iter()).enumerate() {
        for c in 0..3 {
            if !p[c].is_finite() || !v[c].is_finite() {
                return Err(KzmError::NumericalBlowup { ion: i, time: t_si });
            }
        }
    }
    Ok(())
}

/// One integration step on an SI-facing state.
pub fn step(
    state: &mut SimState,
    config: &IntegratorConfig,
    field: &ForceField,
    cooling: &CoolingModel,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    config.validate(field)?;
    cooling.validate(field.trap().omega_weak)?;
    let u = field.units;
    let mut pos: Vec<[f64; 3]> = state
        .positions
        .iter()
        .map(|p| [0, 1, 2].map(|c| u.length_to_scaled(p[c])))
        .collect();
    let mut vel: Vec<[f64; 3]> = state
        .velocities
        .iter()
        .map(|v| [0, 1, 2].map(|c| u.velocity_to_scaled(v[c])))
        .collect();
    let mut t = u.time_to_scaled(state.time);
    let dt = u.time_to_scaled(config.dt);
    let ou = match config.scheme {
        IntegratorScheme::DeterministicVerlet => None,
        IntegratorScheme::StochasticSplitting => Some(OuMap::new(
            cooling.friction_rate * u.time_scale,
            u.temperature_to_scaled(cooling.temperature, state.species),
            dt,
        )),
    };
    let mut acc = vec![[0.0; 3]; pos.len()];
    field.accelerations(&pos, t, &mut acc)?;
    step_scaled(
        &mut pos,
        &mut vel,
        &mut acc,
        &mut t,
        dt,
        field,
        ou.as_ref(),
        rng,
    )?;
    check_finite(&pos, &vel, u.time_to_si(t))?;
    state.time = u.time_to_si(t);
    for (dst, src) in state.positions.iter_mut().zip(&pos) {
        *dst = [0, 1, 2].map(|c| u.length_to_si(src[c]));
    }
    for (dst, src) in state.velocities.iter_mut().zip(&vel) {
        *dst = [0, 1, 2].map(|c| u.velocity_to_si(src[c]));
    }
    Ok(())
}
