//! Trap parametrization, ramp protocol and unit scaling.
//!
//! All public interfaces are SI (rad/s, seconds, metres, volts). Internal
//! computation elsewhere in the crate uses [`ScaledUnits`] with the weak
//! radial frequency as reference, which makes the Coulomb coupling constant
//! equal to one.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, CA40_MASS_U, COULOMB_E2, ELEMENTARY_CHARGE};
use crate::error::{KzmError, Result};

/// Ion species: mass and charge of every ion in the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// Mass in kg.
    pub mass: f64,
    /// Charge in C (positive integer multiple of e).
    pub charge: f64,
}

impl IonSpecies {
    /// Singly ionized calcium-40.
    pub fn ca40() -> Self {
        Self {
            mass: CA40_MASS_U * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(KzmError::Config("ion mass must be positive".into()));
        }
        if !(self.charge > 0.0) {
            return Err(KzmError::Config("ion charge must be positive".into()));
        }
        Ok(())
    }
}

/// How the radial confinement is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfMode {
    /// Static effective harmonic potential at the secular frequencies.
    Pseudopotential,
    /// Explicit cos(Omega t) electrode drive; micromotion resolved.
    FullRf,
}

/// Static trap parameters.
///
/// Axis convention: `z` is the trap axis, `x` is the weak radial axis
/// (the zigzag plane), `y` is the strong radial axis at
/// `anisotropy * omega_weak`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParameters {
    /// Secular frequency of the weak radial axis, rad/s.
    pub omega_weak: f64,
    /// omega_strong / omega_weak, >= 1.
    pub anisotropy: f64,
    /// RF drive frequency Omega, rad/s.
    pub drive_frequency: f64,
    pub rf_mode: RfMode,
    /// Axial calibration `a` such that omega_ax = a * sqrt(V), (rad/s)/sqrt(V).
    pub axial_calibration: f64,
}

impl TrapParameters {
    /// Experiment defaults: omega_weak/2pi = 1394.1 kHz, anisotropy 1.03,
    /// Omega/2pi = 22 MHz, calibration fixed so omega_ax(1 V) = 2pi*344 kHz.
    pub fn experiment_default() -> Self {
        Self {
            omega_weak: 2.0 * PI * 1_394_100.0,
            anisotropy: 1.03,
            drive_frequency: 2.0 * PI * 22.0e6,
            rf_mode: RfMode::Pseudopotential,
            axial_calibration: 2.0 * PI * 344_000.0,
        }
    }

    pub fn omega_strong(&self) -> f64 {
        self.anisotropy * self.omega_weak
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_weak > 0.0) {
            return Err(KzmError::Config("omega_weak must be positive".into()));
        }
        if !(1.0..=1.5).contains(&self.anisotropy) {
            return Err(KzmError::Config(format!(
                "anisotropy {} outside [1, 1.5]",
                self.anisotropy
            )));
        }
        if !(self.axial_calibration > 0.0) {
            return Err(KzmError::Config(
                "axial calibration must be positive".into(),
            ));
        }
        if self.rf_mode == RfMode::FullRf {
            let (_, q_strong) = self.mathieu_q()?;
            debug_assert!(q_strong < 0.4);
        }
        Ok(())
    }

    /// Mathieu q per radial axis, derived from the target secular
    /// frequencies via the lowest-order relation omega = q * Omega / (2 sqrt 2).
    ///
    /// Returns `(q_weak, q_strong)`. Errors when the strong-axis q reaches
    /// the 0.4 stability guard or when the trap is not in full-RF mode.
    pub fn mathieu_q(&self) -> Result<(f64, f64)> {
        if self.rf_mode != RfMode::FullRf {
            return Err(KzmError::State(
                "mathieu_q requires full_rf mode".into(),
            ));
        }
        if !(self.drive_frequency > 0.0) {
            return Err(KzmError::Config("drive frequency must be positive".into()));
        }
        let q_of = |omega: f64| 2.0 * 2.0_f64.sqrt() * omega / self.drive_frequency;
        let q_weak = q_of(self.omega_weak);
        let q_strong = q_of(self.omega_strong());
        if q_strong >= 0.4 {
            return Err(KzmError::Stability { q: q_strong });
        }
        Ok((q_weak, q_strong))
    }
}

/// Sigmoid end-cap voltage schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    /// Start voltage, V.
    pub v_start: f64,
    /// End voltage, V.
    pub v_end: f64,
    /// Sigmoid midpoint, s.
    pub t0: f64,
    /// Sigmoid timescale, s.
    pub tau: f64,
    /// Hold after the ramp before classification, s.
    pub settle_time: f64,
    /// Full trajectory length including the settle phase, s.
    pub total_duration: f64,
}

impl RampProtocol {
    /// Experiment protocol for a given timescale: voltages in units where
    /// v_end = 1 V, frequency endpoints 167 kHz -> 344 kHz under the default
    /// calibration, midpoint at 10 tau and 100 us settle.
    pub fn experiment_default(tau: f64) -> Self {
        let settle = 100e-6;
        Self {
            v_start: (167.0 / 344.0) * (167.0 / 344.0),
            v_end: 1.0,
            t0: 10.0 * tau,
            tau,
            settle_time: settle,
            total_duration: 20.0 * tau + settle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_start > 0.0 && self.v_end > self.v_start) {
            return Err(KzmError::Config(
                "ramp requires v_end > v_start > 0".into(),
            ));
        }
        if !(self.tau > 0.0) {
            return Err(KzmError::Config("ramp tau must be positive".into()));
        }
        if self.settle_time < 0.0 || self.total_duration <= self.settle_time {
            return Err(KzmError::Config(
                "total_duration must exceed settle_time >= 0".into(),
            ));
        }
        let v0 = ramp_voltage(self, 0.0);
        if (v0 - self.v_start).abs() > 0.01 * self.v_start {
            return Err(KzmError::Config(
                "V(0) deviates from v_start by more than 1% (t0/tau too small)".into(),
            ));
        }
        let v1 = ramp_voltage(self, self.total_duration - self.settle_time);
        if (v1 - self.v_end).abs() > 0.01 * self.v_end {
            return Err(KzmError::Config(
                "V at end of ramp deviates from v_end by more than 1%".into(),
            ));
        }
        Ok(())
    }
}

/// Nondimensionalization: length scale l with l^3 = e^2 Z^2/(4 pi eps0 m w_ref^2),
/// time scale 1/w_ref. In these units the ion mass and the Coulomb coupling
/// are both 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledUnits {
    pub length_scale: f64,
    pub time_scale: f64,
    pub omega_ref: f64,
}

impl ScaledUnits {
    /// Scales fixed by species and reference frequency (conventionally the
    /// weak radial frequency).
    pub fn new(species: IonSpecies, omega_ref: f64) -> Result<Self> {
        species.validate()?;
        if !(omega_ref > 0.0) {
            return Err(KzmError::Config("omega_ref must be positive".into()));
        }
        let z = species.charge / ELEMENTARY_CHARGE;
        let l3 = COULOMB_E2 * z * z / (species.mass * omega_ref * omega_ref);
        Ok(Self {
            length_scale: l3.cbrt(),
            time_scale: 1.0 / omega_ref,
            omega_ref,
        })
    }

    pub fn for_trap(species: IonSpecies, trap: &TrapParameters) -> Result<Self> {
        Self::new(species, trap.omega_weak)
    }

    #[inline]
    pub fn length_to_scaled(&self, x_m: f64) -> f64 {
        x_m / self.length_scale
    }
    #[inline]
    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length_scale
    }
    #[inline]
    pub fn time_to_scaled(&self, t_s: f64) -> f64 {
        t_s / self.time_scale
    }
    #[inline]
    pub fn time_to_si(&self, t: f64) -> f64 {
        t * self.time_scale
    }
    #[inline]
    pub fn frequency_to_scaled(&self, w: f64) -> f64 {
        w / self.omega_ref
    }
    #[inline]
    pub fn frequency_to_si(&self, w: f64) -> f64 {
        w * self.omega_ref
    }
    #[inline]
    pub fn velocity_to_scaled(&self, v: f64) -> f64 {
        v * self.time_scale / self.length_scale
    }
    #[inline]
    pub fn velocity_to_si(&self, v: f64) -> f64 {
        v * self.length_scale / self.time_scale
    }

    /// k_B T in scaled energy units (m w_ref^2 l^2) for the given species.
    pub fn temperature_to_scaled(&self, t_kelvin: f64, species: IonSpecies) -> f64 {
        let e_scale =
            species.mass * self.omega_ref * self.omega_ref * self.length_scale * self.length_scale;
        BOLTZMANN * t_kelvin / e_scale
    }
}

/// Sigmoid end-cap voltage at time `t`.
pub fn ramp_voltage(protocol: &RampProtocol, t: f64) -> f64 {
    let s = 1.0 / (1.0 + (-(t - protocol.t0) / protocol.tau).exp());
    protocol.v_start + (protocol.v_end - protocol.v_start) * s
}

/// Square-root voltage-to-frequency calibration: omega_ax = a sqrt(V).
pub fn axial_frequency_from_voltage(trap: &TrapParameters, v: f64) -> Result<f64> {
    if v < 0.0 {
        return Err(KzmError::Domain(format!(
            "axial frequency undefined for negative voltage {v}"
        )));
    }
    Ok(trap.axial_calibration * v.sqrt())
}

/// Axial frequency along the ramp, rad/s.
pub fn axial_frequency_at(trap: &TrapParameters, protocol: &RampProtocol, t: f64) -> f64 {
    trap.axial_calibration * ramp_voltage(protocol, t).sqrt()
}

/// Quench rate gamma = d omega_ax/dt at the crossing of `omega_crit`.
///
/// The crossing time is bisected to 1e-12 relative in omega; the derivative
/// itself is the analytic chain rule a/(2 sqrt V) * dV/dt.
pub fn gamma_at_critical_point(
    trap: &TrapParameters,
    protocol: &RampProtocol,
    omega_crit: f64,
) -> Result<f64> {
    let w_lo = axial_frequency_from_voltage(trap, protocol.v_start)?;
    let w_hi = axial_frequency_from_voltage(trap, protocol.v_end)?;
    if !(omega_crit > w_lo && omega_crit < w_hi) {
        return Err(KzmError::Range(format!(
            "omega_crit {:.6e} outside ramp range ({:.6e}, {:.6e}) rad/s",
            omega_crit, w_lo, w_hi
        )));
    }
    // Bracket: the sigmoid is within 1e-12 of its asymptotes beyond ~30 tau.
    let mut lo = protocol.t0 - 50.0 * protocol.tau;
    let mut hi = protocol.t0 + 50.0 * protocol.tau;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let w = axial_frequency_at(trap, protocol, mid);
        if w < omega_crit {
            lo = mid;
        } else {
            hi = mid;
        }
        if (axial_frequency_at(trap, protocol, lo) - axial_frequency_at(trap, protocol, hi)).abs()
            < 1e-12 * omega_crit
        {
            break;
        }
    }
    let t_cp = 0.5 * (lo + hi);
    let v = ramp_voltage(protocol, t_cp);
    let s = (v - protocol.v_start) / (protocol.v_end - protocol.v_start);
    let dv_dt = (protocol.v_end - protocol.v_start) * s * (1.0 - s) / protocol.tau;
    Ok(trap.axial_calibration / (2.0 * v.sqrt()) * dv_dt)
}
