//! Physical constants (CODATA 2018 exact values where defined).

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One torr in pascal.
pub const TORR: f64 = 101_325.0 / 760.0;

/// Mass of a ⁸⁷Rb atom, kg.
pub const RB87_MASS: f64 = 1.443_160_648e-25;

/// ⁸⁷Rb D1 line frequency, Hz.
pub const RB87_D1_FREQUENCY: f64 = 377.107_463e12;

/// Zero degrees Celsius in kelvin.
pub const ZERO_CELSIUS: f64 = 273.15;

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;
