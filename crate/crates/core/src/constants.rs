//! Physical constants (CODATA 2018, SI).

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Electron mass (kg).
pub const M_E: f64 = 9.109_383_701_5e-31;
/// One debye in C·m.
pub const DEBYE: f64 = 3.335_640_952e-30;
