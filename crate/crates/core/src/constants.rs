//! Physical constants (CODATA 2018, SI).

/// Reduced Planck constant, J·s (h / 2π with h exact).
pub const HBAR: f64 = 1.054_571_817_646_156_5e-34;
/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s (exact).
pub const C_LIGHT: f64 = 299_792_458.0;
/// Elementary charge, C (exact).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Thermal angular frequency k_B T / ħ, rad/s.
#[inline]
pub fn thermal_frequency(temperature: f64) -> f64 {
    K_B * temperature / HBAR
}
