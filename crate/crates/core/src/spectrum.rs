//! Stroboscopic excitation spectra and nutation-angle calibration.
//!
//! Stepping the detuning (or the pulse length) advances the effective
//! nutation angle by a fixed increment per step, so the sampled excitation
//! probability oscillates across the carrier. Vibronic sidebands are not
//! modelled; the scan covers the carrier only.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::bloch::{excitation_probability_coherent, DriveParams};
use crate::error::{invalid, Error, Result};
use crate::stats::estimate_p01_detailed;
use crate::trajectory::simulate_zeno_with;

/// Which drive parameter is stepped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    #[default]
    Detuning,
    PulseLength,
}

/// Monte Carlo settings for a scan: each point gets its own record of
/// `n_measurements`, seeded with `seed + k` for point k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_measurements: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// rad/s
    pub detuning: f64,
    /// s
    pub tau: f64,
    pub p01_model: f64,
    pub p01_mc: Option<f64>,
    pub std_error: Option<f64>,
}

/// Scans `count` points starting from `base`, adding `step` along `axis`
/// (rad/s for detuning, s for pulse length) per point.
pub fn scan(
    base: &DriveParams,
    axis: ScanAxis,
    step: f64,
    count: usize,
    mc: Option<McOptions>,
) -> Result<Vec<SpectrumPoint>> {
    base.validate()?;
    if count == 0 {
        return Err(invalid("count", "must be ≥ 1"));
    }
    if !step.is_finite() {
        return Err(invalid("step", "must be finite"));
    }
    (0..count)
        .map(|k| scan_point(base, axis, step, k, mc))
        .collect()
}

/// Point k of [`scan`], computed on its own so that points can be evaluated
/// in any order (or in parallel) with identical results.
pub fn scan_point(
    base: &DriveParams,
    axis: ScanAxis,
    step: f64,
    k: usize,
    mc: Option<McOptions>,
) -> Result<SpectrumPoint> {
    let offset = k as f64 * step;
    let drive = match axis {
        ScanAxis::Detuning => base.with_delta(base.delta + offset),
        ScanAxis::PulseLength => base.with_tau(base.tau + offset),
    };
    drive.validate()?;
    let p01_model = excitation_probability_coherent(&drive);
    let (p01_mc, std_error) = match mc {
        Some(opts) => {
            let stay = 1.0 - p01_model;
            let seed = opts.seed.wrapping_add(k as u64);
            let traj = simulate_zeno_with(stay, stay, opts.n_measurements, seed)?;
            let est = estimate_p01_detailed(traj.outcomes())?;
            (Some(est.value), Some(est.std_error))
        }
        None => (None, None),
    };
    Ok(SpectrumPoint {
        detuning: drive.delta,
        tau: drive.tau,
        p01_model,
        p01_mc,
        std_error,
    })
}

/// Detuning scan Δ_k = Δ₀ + k·step.
pub fn scan_detuning(
    base: &DriveParams,
    step: f64,
    count: usize,
    mc: Option<McOptions>,
) -> Result<Vec<SpectrumPoint>> {
    scan(base, ScanAxis::Detuning, step, count, mc)
}

/// Increment of the nutation angle for one detuning step,
/// √(θ² + (τδω)²) − θ.
pub fn delta_theta(theta: f64, delta_omega: f64, tau: f64) -> Result<f64> {
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(invalid(
            "theta",
            format!("must be finite and ≥ 0, got {theta}"),
        ));
    }
    let x = tau * delta_omega;
    let x_sq = x * x;
    if x_sq == 0.0 {
        return Ok(0.0);
    }
    // rationalized to avoid cancellation at θ ≫ τδω
    Ok(x_sq / ((theta * theta + x_sq).sqrt() + theta))
}

/// A branch of the inverted increment relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaCandidate {
    /// Number of whole turns added to the observed residual.
    pub branch: u32,
    pub delta_theta: f64,
    pub theta: f64,
    /// Whole revolutions in θ.
    pub revolutions: u64,
    /// |θ − θ_app|
    pub distance: f64,
}

/// Lists every θ compatible with an increment equal to `observed_residual`
/// modulo 2π, nearest to `theta_app` first.
pub fn resolve_theta(
    theta_app: f64,
    observed_residual: f64,
    delta_omega: f64,
    tau: f64,
) -> Result<Vec<ThetaCandidate>> {
    if !(theta_app.is_finite() && theta_app > 0.0) {
        return Err(invalid("theta_app", "must be finite and > 0"));
    }
    if !(0.0..TAU).contains(&observed_residual) {
        return Err(invalid("observed_residual", "must lie in [0, 2π)"));
    }
    if !(tau.is_finite() && tau > 0.0 && delta_omega.is_finite()) {
        return Err(invalid("tau", "τ must be > 0 and δω finite"));
    }
    let x_sq = (tau * delta_omega).powi(2);
    let mut candidates = Vec::new();
    for branch in 0u32.. {
        let dt = observed_residual + TAU * branch as f64;
        if dt * dt >= x_sq {
            break;
        }
        if dt == 0.0 {
            // zero increment corresponds to θ → ∞
            continue;
        }
        let theta = (x_sq - dt * dt) / (2.0 * dt);
        candidates.push(ThetaCandidate {
            branch,
            delta_theta: dt,
            theta,
            revolutions: (theta / TAU).floor() as u64,
            distance: (theta - theta_app).abs(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::NoPositiveCandidate);
    }
    candidates.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(candidates)
}
