//! Unit conventions: frequencies in kHz (linewidths, Stark coefficient) or
//! MHz (spectral feature widths), times in µs, Stark areas in V·µs/cm.
//!
//! Every kHz × µs product in the crate goes through this module so that the
//! 10⁻³ reconciliation factor is applied exactly once.

use std::f64::consts::TAU;

/// kHz × µs → dimensionless cycles.
pub const KHZ_US_TO_CYCLES: f64 = 1e-3;

/// MHz → kHz.
pub const MHZ_TO_KHZ: f64 = 1e3;

/// Number of cycles accumulated by a frequency `f_khz` over `t_us`.
#[inline]
pub fn cycles(f_khz: f64, t_us: f64) -> f64 {
    f_khz * t_us * KHZ_US_TO_CYCLES
}

/// Angular frequency in rad/µs for a frequency given in kHz.
#[inline]
pub fn khz_to_rad_per_us(f_khz: f64) -> f64 {
    TAU * f_khz * KHZ_US_TO_CYCLES
}

/// Per-class Stark phase (rad) for a Stark coefficient in kHz/(V/cm) and a
/// pulse area in V·µs/cm.
#[inline]
pub fn stark_phase(kappa_khz_per_v_cm: f64, area_v_us_per_cm: f64) -> f64 {
    TAU * cycles(kappa_khz_per_v_cm, area_v_us_per_cm)
}

/// Stark area giving a class-to-class relative phase of π for one pulse.
#[inline]
pub fn silencing_area(kappa_khz_per_v_cm: f64) -> f64 {
    1.0 / (4.0 * kappa_khz_per_v_cm * KHZ_US_TO_CYCLES)
}
