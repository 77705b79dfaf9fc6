//! Physical constants (SI, CODATA 2018).

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_8128e-12;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Atomic mass of calcium-40 in u.
pub const CA40_MASS_U: f64 = 39.962_590_866;

/// Coulomb constant e^2/(4 pi eps0), J*m, for a unit charge pair.
pub const COULOMB_E2: f64 =
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * core::f64::consts::PI * EPSILON_0);
