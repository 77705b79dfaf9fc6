//! Molecular-dynamics study of defect formation in laser-cooled ion
//! Coulomb crystals driven across the linear-to-zigzag transition.
//!
//! The crate is organized bottom-up: trap/ramp parametrization
//! ([`model`]), equilibrium structure and normal modes ([`statics`]),
//! stochastic time integration of quenches ([`dynamics`]), final-state
//! classification ([`analysis`]) and Monte-Carlo sweeps with the
//! power-law fit of the defect scaling ([`sweep`]).

pub mod analysis;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod statics;
pub mod sweep;

pub use config::RunConfig;
pub use error::{KzmError, Result};
pub use model::{
    axial_frequency_at, axial_frequency_from_voltage, gamma_at_critical_point, ramp_voltage,
    IonSpecies, RampProtocol, RfMode, ScaledUnits, TrapParameters,
};
pub use statics::{
    critical_axial_frequency, equilibrium_positions, mode_spectrum, zigzag_reference_amplitudes,
    CriticalPoint, EquilibriumConfiguration, ModeBranch, ModeSpectrum,
};
pub use dynamics::{
    local_onset_times, run_quench, CoolingModel, IntegratorConfig, IntegratorScheme,
    OnsetThresholds, QuenchSetup, SimState, TrajectoryResult,
};
pub use analysis::{
    build_reference_templates, classify_configuration, defect_density, fourier_template_classify,
    render_synthetic_image, ClassifierThresholds, CrystalClass, CrystalConfiguration,
    FourierOutcome, ImageGeometry, SyntheticImage, TemplateLibrary,
};
pub use sweep::{
    anisotropy_comparison, derive_seed, fit_power_law, run_sweep, AnisotropyComparison,
    PowerLawFit, SweepPlan, SweepPoint,
};
