//! Full quench pipeline: thermal initialization, burn-in, ramp, settle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{KzmError, Result};
use crate::model::{axial_frequency_at, IonSpecies, RampProtocol, TrapParameters};
use crate::statics::{equilibrium_positions, mode_spectrum, ModeSpectrum};

use super::diagnostics::{local_onset_times, OnsetThresholds};
use super::forces::{AxialSchedule, ForceField};
use super::integrator::{check_finite, step_scaled, CoolingModel, IntegratorConfig, IntegratorScheme, OuMap};

/// Instantaneous state of the crystal, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// Time, s (zero at the start of the ramp phase).
    pub time: f64,
    /// Per-ion positions, m; x weak radial, y strong radial, z axial.
    pub positions: Vec<[f64; 3]>,
    /// Per-ion velocities, m/s.
    pub velocities: Vec<[f64; 3]>,
    pub species: IonSpecies,
}

impl SimState {
    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }
}

/// Outcome of one quench trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub final_state: SimState,
    /// Per-ion local transition onset time (s from ramp start), when the
    /// trajectory was recorded with snapshots.
    pub onset_times: Option<Vec<Option<f64>>>,
    /// True iff the axial ordering changed at any sampled instant.
    pub swapped: bool,
    /// Smallest pair distance seen anywhere in the run, m.
    pub min_pair_distance: f64,
    pub snapshots: Option<Vec<SimState>>,
}

/// Everything needed to run one quench trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchSetup {
    pub n_ions: usize,
    pub species: IonSpecies,
    pub trap: TrapParameters,
    pub ramp: RampProtocol,
    pub cooling: CoolingModel,
    pub integrator: IntegratorConfig,
}

impl QuenchSetup {
    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(KzmError::Config("n_ions must be >= 1".into()));
        }
        self.species.validate()?;
        self.trap.validate()?;
        self.ramp.validate()?;
        self.cooling.validate(self.trap.omega_weak)?;
        Ok(())
    }
}

/// Per-ion thermal RMS weak-axis displacement of a mode spectrum at
/// scaled temperature `kt`, in scaled length units.
pub fn thermal_weak_axis_rms(modes: &ModeSpectrum, kt_scaled: f64) -> Vec<f64> {
    let n = modes.omega_sq_scaled.len() / 3;
    let mut var = vec![0.0; n];
    for (k, &lam) in modes.omega_sq_scaled.iter().enumerate() {
        if lam <= 1e-9 {
            continue;
        }
        let col = modes.eigenvectors.column(k);
        for (i, v) in var.iter_mut().enumerate() {
            let e = col[3 * i];
            *v += kt_scaled / lam * e * e;
        }
    }
    var.iter().map(|v| v.sqrt()).collect()
}

fn ordering_intact(pos: &[[f64; 3]]) -> bool {
    pos.windows(2).all(|w| w[0][2] <= w[1][2])
}

/// Run one full quench: thermal init at the start trap, cooled burn-in,
/// ramp, settle. Melting (ion swaps) is recorded, not an error.
pub fn run_quench(setup: &QuenchSetup, seed: u64) -> Result<TrajectoryResult> {
    setup.validate()?;
    let field = ForceField::new(
        setup.species,
        &setup.trap,
        AxialSchedule::Ramp(setup.ramp),
    )?;
    setup.integrator.validate(&field)?;
    let u = field.units;
    let w_start = axial_frequency_at(&setup.trap, &setup.ramp, 0.0);
    let start_cfg = equilibrium_positions(setup.n_ions, setup.species, &setup.trap, w_start)?;
    let modes = mode_spectrum(&start_cfg)?;
    let kt = u.temperature_to_scaled(setup.cooling.temperature, setup.species);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = start_cfg.positions.clone();
    let mut vel = vec![[0.0; 3]; setup.n_ions];
    if kt > 0.0 {
        for (k, &lam) in modes.omega_sq_scaled.iter().enumerate() {
            if lam <= 1e-9 {
                continue;
            }
            let amp_q = (kt / lam).sqrt();
            let amp_p = kt.sqrt();
            let q: f64 = rng.sample::<f64, _>(StandardNormal) * amp_q;
            let p: f64 = rng.sample::<f64, _>(StandardNormal) * amp_p;
            let col = modes.eigenvectors.column(k);
            for i in 0..setup.n_ions {
                for a in 0..3 {
                    pos[i][a] += q * col[3 * i + a];
                    vel[i][a] += p * col[3 * i + a];
                }
            }
        }
    }

    let dt = u.time_to_scaled(setup.integrator.dt);
    let ou = match setup.integrator.scheme {
        IntegratorScheme::DeterministicVerlet => None,
        IntegratorScheme::StochasticSplitting => Some(OuMap::new(
            setup.cooling.friction_rate * u.time_scale,
            kt,
            dt,
        )),
    };
    let mut min_r = f64::INFINITY;
    let mut swapped = false;
    let mut acc = vec![[0.0; 3]; setup.n_ions];
    const SWAP_CHECK_STRIDE: usize = 50;

    // Burn-in at the frozen start trap: min(20/eta, 200 us).
    let burn_si = if setup.cooling.friction_rate > 0.0 {
        (20.0 / setup.cooling.friction_rate).min(200e-6)
    } else {
        200e-6
    };
    let burn_steps = (u.time_to_scaled(burn_si) / dt).ceil() as usize;
    let static_field = ForceField::new(
        setup.species,
        &setup.trap,
        AxialSchedule::Static(w_start),
    )?;
    let mut t = 0.0;
    min_r = min_r.min(static_field.accelerations(&pos, t, &mut acc)?);
    for i in 0..burn_steps {
        let r = step_scaled(
            &mut pos,
            &mut vel,
            &mut acc,
            &mut t,
            dt,
            &static_field,
            ou.as_ref(),
            &mut rng,
        )?;
        min_r = min_r.min(r);
        if i % SWAP_CHECK_STRIDE == 0 {
            check_finite(&pos, &vel, u.time_to_si(t))?;
            swapped |= !ordering_intact(&pos);
        }
    }
    check_finite(&pos, &vel, u.time_to_si(t))?;

    // Ramp + settle phase; the clock restarts at zero.
    let stride = setup.integrator.sample_stride;
    let mut snapshots: Option<Vec<SimState>> = if stride > 0 { Some(Vec::new()) } else { None };
    let to_si_state = |t: f64, pos: &[[f64; 3]], vel: &[[f64; 3]]| SimState {
        time: u.time_to_si(t),
        positions: pos
            .iter()
            .map(|p| [0, 1, 2].map(|c| u.length_to_si(p[c])))
            .collect(),
        velocities: vel
            .iter()
            .map(|v| [0, 1, 2].map(|c| u.velocity_to_si(v[c])))
            .collect(),
        species: setup.species,
    };
    t = 0.0;
    let n_steps = (u.time_to_scaled(setup.ramp.total_duration) / dt).ceil() as usize;
    min_r = min_r.min(field.accelerations(&pos, t, &mut acc)?);
    for i in 0..n_steps {
        if let Some(snaps) = snapshots.as_mut() {
            if i % stride == 0 {
                snaps.push(to_si_state(t, &pos, &vel));
            }
        }
        let r = step_scaled(
            &mut pos,
            &mut vel,
            &mut acc,
            &mut t,
            dt,
            &field,
            ou.as_ref(),
            &mut rng,
        )?;
        min_r = min_r.min(r);
        if i % SWAP_CHECK_STRIDE == 0 {
            check_finite(&pos, &vel, u.time_to_si(t))?;
            swapped |= !ordering_intact(&pos);
        }
    }
    check_finite(&pos, &vel, u.time_to_si(t))?;
    swapped |= !ordering_intact(&pos);
    let final_state = to_si_state(t, &pos, &vel);
    if let Some(snaps) = snapshots.as_mut() {
        snaps.push(final_state.clone());
    }

    let onset_times = match snapshots.as_ref() {
        Some(snaps) => {
            let rms_si: Vec<f64> = thermal_weak_axis_rms(&modes, kt)
                .iter()
                .map(|r| u.length_to_si(*r))
                .collect();
            Some(local_onset_times(
                snaps,
                &rms_si,
                &OnsetThresholds::default(),
                setup.trap.omega_weak,
            )?)
        }
        None => None,
    };

    Ok(TrajectoryResult {
        final_state,
        onset_times,
        swapped,
        min_pair_distance: u.length_to_si(min_r),
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RampProtocol;

    fn setup(tau: f64) -> QuenchSetup {
        QuenchSetup {
            n_ions: 16,
            species: IonSpecies::ca40(),
            trap: TrapParameters::experiment_default(),
            ramp: RampProtocol::experiment_default(tau),
            cooling: CoolingModel::doppler_default(),
            integrator: IntegratorConfig::pseudopotential_default(),
        }
    }

    #[test]
    fn quench_is_deterministic() {
        let s = setup(1e-6);
        let a = run_quench(&s, 123).unwrap();
        let b = run_quench(&s, 123).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.swapped, b.swapped);
    }

    #[test]
    fn different_seeds_differ() {
        let s = setup(1e-6);
        let a = run_quench(&s, 1).unwrap();
        let b = run_quench(&s, 2).unwrap();
        assert_ne!(a.final_state.positions, b.final_state.positions);
    }

    #[test]
    fn min_pair_distance_positive() {
        let s = setup(1e-6);
        let r = run_quench(&s, 5).unwrap();
        assert!(r.min_pair_distance > 0.0);
        assert!(r.min_pair_distance.is_finite());
    }

    #[test]
    fn snapshots_recorded_when_requested() {
        let mut s = setup(1e-6);
        s.integrator.sample_stride = 50;
        let r = run_quench(&s, 9).unwrap();
        let snaps = r.snapshots.as_ref().unwrap();
        assert!(snaps.len() > 100);
        assert!(r.onset_times.is_some());
        assert!(snaps.windows(2).all(|w| w[0].time < w[1].time));
    }
}
