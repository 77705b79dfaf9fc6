//! Deterministic force evaluation in scaled units.

use crate::error::{KzmError, Result};
use crate::model::{
    axial_frequency_at, IonSpecies, RampProtocol, RfMode, ScaledUnits, TrapParameters,
};

/// Minimum allowed pair separation, scaled length units.
pub(crate) const SINGULARITY_GUARD: f64 = 1e-6;

/// Time dependence of the axial confinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxialSchedule {
    /// Fixed axial frequency, rad/s.
    Static(f64),
    /// Sigmoid voltage ramp; time measured from ramp start.
    Ramp(RampProtocol),
}

/// Precomputed scaled force parameters for one trap/ramp combination.
#[derive(Debug, Clone)]
pub struct ForceField {
    pub units: ScaledUnits,
    /// Squared scaled secular frequencies of the radial axes (x weak, y strong).
    nu_x_sq: f64,
    nu_y_sq: f64,
    /// Full-RF drive: (q_x, q_y, Omega in scaled angular frequency).
    rf: Option<(f64, f64, f64)>,
    axial: AxialSchedule,
    trap: TrapParameters,
}

impl ForceField {
    pub fn new(species: IonSpecies, trap: &TrapParameters, axial: AxialSchedule) -> Result<Self> {
        trap.validate()?;
        let units = ScaledUnits::for_trap(species, trap)?;
        let rf = match trap.rf_mode {
            RfMode::Pseudopotential => None,
            RfMode::FullRf => {
                let (qx, qy) = trap.mathieu_q()?;
                Some((qx, qy, units.frequency_to_scaled(trap.drive_frequency)))
            }
        };
        let aniso = trap.anisotropy;
        Ok(Self {
            units,
            nu_x_sq: 1.0,
            nu_y_sq: aniso * aniso,
            rf,
            axial,
            trap: *trap,
        })
    }

    /// Squared scaled axial frequency at scaled time `t`.
    #[inline]
    pub fn nu_ax_sq(&self, t_scaled: f64) -> f64 {
        let w = match self.axial {
            AxialSchedule::Static(w) => w,
            AxialSchedule::Ramp(ref p) => {
                axial_frequency_at(&self.trap, p, self.units.time_to_si(t_scaled))
            }
        };
        let nu = self.units.frequency_to_scaled(w);
        nu * nu
    }

    pub fn trap(&self) -> &TrapParameters {
        &self.trap
    }

    pub fn axial_schedule(&self) -> &AxialSchedule {
        &self.axial
    }

    /// Largest secular frequency entering the dt stability bound, rad/s.
    pub fn omega_max(&self) -> f64 {
        let w_end = match self.axial {
            AxialSchedule::Static(w) => w,
            AxialSchedule::Ramp(ref p) => self.trap.axial_calibration * p.v_end.sqrt(),
        };
        self.trap.omega_strong().max(w_end)
    }

    /// Accelerations in scaled units; also returns the minimum pair distance
    /// encountered. Errors on ion coincidence.
    pub fn accelerations(
        &self,
        positions: &[[f64; 3]],
        t_scaled: f64,
        acc: &mut [[f64; 3]],
    ) -> Result<f64> {
        let n = positions.len();
        debug_assert_eq!(acc.len(), n);
        let nu_z_sq = self.nu_ax_sq(t_scaled);
        match self.rf {
            None => {
                for (a, p) in acc.iter_mut().zip(positions) {
                    a[0] = -self.nu_x_sq * p[0];
                    a[1] = -self.nu_y_sq * p[1];
                    a[2] = -nu_z_sq * p[2];
                }
            }
            Some((qx, qy, omega)) => {
                // Mathieu a = 0: x'' = (Omega^2 q/2) cos(Omega t) x, with
                // opposite drive sign on the two radial axes.
                let c = (omega * t_scaled).cos() * omega * omega * 0.5;
                for (a, p) in acc.iter_mut().zip(positions) {
                    a[0] = c * qx * p[0];
                    a[1] = -c * qy * p[1];
                    a[2] = -nu_z_sq * p[2];
                }
            }
        }
        let mut min_r = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                let dz = positions[i][2] - positions[j][2];
                let r2 = dx * dx + dy * dy + dz * dz;
                let r = r2.sqrt();
                if r < SINGULARITY_GUARD {
                    return Err(KzmError::Singularity {
                        i,
                        j,
                        distance: r,
                    });
                }
                if r < min_r {
                    min_r = r;
                }
                let inv3 = 1.0 / (r2 * r);
                let fx = dx * inv3;
                let fy = dy * inv3;
                let fz = dz * inv3;
                acc[i][0] += fx;
                acc[i][1] += fy;
                acc[i][2] += fz;
                acc[j][0] -= fx;
                acc[j][1] -= fy;
                acc[j][2] -= fz;
            }
        }
        Ok(min_r)
    }
}

/// Deterministic accelerations in SI units (m/s^2) at SI time `t`.
pub fn total_acceleration(
    positions_m: &[[f64; 3]],
    t: f64,
    species: IonSpecies,
    trap: &TrapParameters,
    axial: AxialSchedule,
) -> Result<Vec<[f64; 3]>> {
    let field = ForceField::new(species, trap, axial)?;
    let u = field.units;
    let pos: Vec<[f64; 3]> = positions_m
        .iter()
        .map(|p| {
            [
                u.length_to_scaled(p[0]),
                u.length_to_scaled(p[1]),
                u.length_to_scaled(p[2]),
            ]
        })
        .collect();
    let mut acc = vec![[0.0; 3]; pos.len()];
    field.accelerations(&pos, u.time_to_scaled(t), &mut acc)?;
    let a_scale = u.length_scale / (u.time_scale * u.time_scale);
    Ok(acc
        .iter()
        .map(|a| [a[0] * a_scale, a[1] * a_scale, a[2] * a_scale])
        .collect())
}
