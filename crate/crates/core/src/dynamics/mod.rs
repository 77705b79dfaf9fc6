//! Stochastic time integration of the 3N equations of motion: trap forces
//! (pseudopotential or resolved RF drive), pairwise Coulomb repulsion and a
//! Langevin thermostat standing in for Doppler cooling.

mod diagnostics;
mod forces;
mod integrator;
mod quench;
pub mod spectral;

pub use diagnostics::{front_speed, local_onset_times, OnsetThresholds};
pub use forces::{total_acceleration, AxialSchedule, ForceField};
pub use integrator::{step, CoolingModel, IntegratorConfig, IntegratorScheme};
pub use quench::{run_quench, thermal_weak_axis_rms, QuenchSetup, SimState, TrajectoryResult};
