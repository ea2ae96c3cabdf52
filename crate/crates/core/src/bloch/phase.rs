//! Drive-laser phase diffusion: ⟨(δφ)²⟩ = Dτ with γ_ph = D/2, so that
//! γ_ph·τ = 2a − b and the phase spread is √2·√(2a − b).

use crate::error::{invalid, Error, Result};

/// Controlled 1-s bandwidth of the drive laser, Hz.
pub const BANDWIDTH_LIMIT_HZ: f64 = 500.0;

/// Standard deviation of the drive phase accumulated over one pulse.
pub fn phase_std(a: f64, b: f64) -> Result<f64> {
    let variance_half = 2.0 * a - b;
    if variance_half < 0.0 || !variance_half.is_finite() {
        return Err(Error::NegativeVariance {
            value: variance_half,
        });
    }
    Ok(std::f64::consts::SQRT_2 * variance_half.sqrt())
}

/// Bandwidth δν = δφ/τ, taken as a plain ratio (no 2π).
pub fn bandwidth_from_phase(delta_phi: f64, tau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", format!("must be finite and > 0, got {tau}")));
    }
    Ok(delta_phi / tau)
}

/// Bandwidth with δφ read as an angle, δφ/(2πτ).
pub fn bandwidth_angular_hz(delta_phi: f64, tau: f64) -> Result<f64> {
    Ok(bandwidth_from_phase(delta_phi, tau)? / std::f64::consts::TAU)
}

/// Whether `bandwidth_hz` is compatible with an "≲ 500 Hz" bound, read as
/// agreement in order of magnitude: strictly below twice the limit.
pub fn is_bandwidth_consistent(bandwidth_hz: f64) -> bool {
    bandwidth_hz < 2.0 * BANDWIDTH_LIMIT_HZ
}
