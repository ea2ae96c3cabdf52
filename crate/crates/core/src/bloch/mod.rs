//! Closed-form dynamics of a resonantly driven two-level system with
//! inversion and phase relaxation, plus the coherent (relaxation-free)
//! excitation probability for arbitrary detuning.
//!
//! Conventions used throughout: the inversion `w` relaxes towards −1 at rate
//! Γ, the coherences decay at γ = γ_ph + Γ/2, and the dimensionless
//! combinations are `a = γτ/2`, `b = Γτ/2`.

mod ode;
mod phase;

pub use ode::{
    ode_oracle_evolve, ode_oracle_trajectory, ode_transition_probability, BlochRates, BlochState,
    OdeOptions,
};
pub use phase::{
    bandwidth_angular_hz, bandwidth_from_phase, is_bandwidth_consistent, phase_std,
    BANDWIDTH_LIMIT_HZ,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::outcome::Outcome;

/// Slack allowed before a closed-form probability is reported as invalid.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Drive pulse: Rabi frequency Ω and detuning Δ in rad/s, length τ in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub omega: f64,
    pub delta: f64,
    pub tau: f64,
}

impl DriveParams {
    pub fn new(omega: f64, delta: f64, tau: f64) -> Result<Self> {
        let drive = Self { omega, delta, tau };
        drive.validate()?;
        Ok(drive)
    }

    /// Resonant drive with Ωτ equal to `pulse_area` for a pulse of length `tau`.
    pub fn resonant_with_area(pulse_area: f64, tau: f64) -> Result<Self> {
        Self::new(pulse_area / tau, 0.0, tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(invalid(
                "omega",
                format!("must be finite and ≥ 0, got {}", self.omega),
            ));
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid(
                "tau",
                format!("must be finite and > 0, got {}", self.tau),
            ));
        }
        Ok(())
    }

    /// Ωτ.
    pub fn pulse_area(&self) -> f64 {
        self.omega * self.tau
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }
}

/// Inversion relaxation rate Γ and drive phase-diffusion rate γ_ph, both 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelaxationParams {
    pub big_gamma: f64,
    pub gamma_ph: f64,
}

impl RelaxationParams {
    pub fn new(big_gamma: f64, gamma_ph: f64) -> Result<Self> {
        let relax = Self {
            big_gamma,
            gamma_ph,
        };
        relax.validate()?;
        Ok(relax)
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.big_gamma.is_finite() && self.big_gamma >= 0.0) {
            return Err(invalid(
                "big_gamma",
                format!("must be finite and ≥ 0, got {}", self.big_gamma),
            ));
        }
        if !(self.gamma_ph.is_finite() && self.gamma_ph >= 0.0) {
            return Err(invalid(
                "gamma_ph",
                format!("must be finite and ≥ 0, got {}", self.gamma_ph),
            ));
        }
        Ok(())
    }

    /// Transverse relaxation rate γ = γ_ph + Γ/2.
    pub fn gamma(&self) -> f64 {
        self.gamma_ph + 0.5 * self.big_gamma
    }

    /// Phase diffusion constant D = 2γ_ph.
    pub fn diffusion_constant(&self) -> f64 {
        2.0 * self.gamma_ph
    }

    pub fn is_zero(&self) -> bool {
        self.big_gamma == 0.0 && self.gamma_ph == 0.0
    }
}

/// Zeeman-degeneracy corrections to the two transition probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyFactors {
    pub f0: f64,
    pub f1: f64,
}

impl DegeneracyFactors {
    pub fn new(f0: f64, f1: f64) -> Result<Self> {
        for (name, f) in [("f0", f0), ("f1", f1)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1], got {f}")));
            }
        }
        Ok(Self { f0, f1 })
    }

    pub fn unity() -> Self {
        Self { f0: 1.0, f1: 1.0 }
    }

    pub fn for_start(&self, start: Outcome) -> f64 {
        match start {
            Outcome::On => self.f0,
            Outcome::Off => self.f1,
        }
    }
}

/// Dimensionless parameters of the resonant damped-nutation solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedBlochParams {
    /// γτ/2
    pub a: f64,
    /// Γτ/2
    pub b: f64,
    /// Damped nutation angle, θ² = (Ωτ)² − (a−b)².
    pub theta: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// Steady-state excited population (Ω²/2)/(Ω²+Γγ).
    pub b0: f64,
    pub b1: f64,
    /// Ωτ, kept because ε₁ depends on it separately from θ.
    pub omega_tau: f64,
}

impl DerivedBlochParams {
    /// Builds the parameter bundle from Ωτ and the dimensionless rates.
    pub fn from_dimensionless(omega_tau: f64, a: f64, b: f64) -> Result<Self> {
        if !(omega_tau.is_finite() && omega_tau >= 0.0) {
            return Err(invalid(
                "omega_tau",
                format!("must be finite and ≥ 0, got {omega_tau}"),
            ));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(invalid("a", format!("must be finite and ≥ 0, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(invalid("b", format!("must be finite and ≥ 0, got {b}")));
        }
        let area_sq = omega_tau * omega_tau;
        let damping_sq = (a - b) * (a - b);
        if area_sq <= damping_sq {
            return Err(Error::OverdampedRegime {
                omega_tau_sq: area_sq,
                damping_sq,
            });
        }
        let theta = (area_sq - damping_sq).sqrt();
        let eps0 = ((a + b) / theta).atan();
        let eps1 = ((a - b - 2.0 * b * area_sq / (area_sq + 8.0 * a * b)) / theta).atan();
        // Γγτ² = 4ab
        let b0 = 0.5 * area_sq / (area_sq + 4.0 * a * b);
        Ok(Self {
            a,
            b,
            theta,
            eps0,
            eps1,
            b0,
            b1: 1.0 - b0,
            omega_tau,
        })
    }

    /// Builds the bundle from the damped nutation angle θ instead of Ωτ.
    pub fn from_theta(theta: f64, a: f64, b: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(invalid(
                "theta",
                format!("must be finite and > 0, got {theta}"),
            ));
        }
        let mut params =
            Self::from_dimensionless((theta * theta + (a - b) * (a - b)).sqrt(), a, b)?;
        params.theta = theta;
        params.eps0 = ((a + b) / theta).atan();
        let area_sq = params.omega_tau * params.omega_tau;
        params.eps1 = ((a - b - 2.0 * b * area_sq / (area_sq + 8.0 * a * b)) / theta).atan();
        Ok(params)
    }

    /// Replaces the steady-state populations, e.g. with a fitted contrast value.
    pub fn with_b0(self, b0: f64) -> Self {
        Self {
            b0,
            b1: 1.0 - b0,
            ..self
        }
    }

    pub fn a_plus_b(&self) -> f64 {
        self.a + self.b
    }

    /// Probability of finding the ion again in `start` after one drive pulse.
    pub fn survival(&self, start: Outcome, f: f64) -> Result<f64> {
        let (eps, pop) = match start {
            Outcome::On => (self.eps0, self.b0),
            Outcome::Off => (self.eps1, self.b1),
        };
        let amplitude = (1.0 + eps.tan().powi(2)).sqrt() * (-(self.a + self.b)).exp();
        let p = 1.0 - f * pop * (1.0 - amplitude * (self.theta - eps).cos());
        if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
            return Err(Error::InvalidProbability { value: p });
        }
        Ok(p)
    }
}

/// Computes a, b, θ, ε₀, ε₁, B₀, B₁ for a resonant drive.
pub fn derive_bloch_params(
    drive: &DriveParams,
    relax: &RelaxationParams,
) -> Result<DerivedBlochParams> {
    drive.validate()?;
    relax.validate()?;
    if drive.delta != 0.0 {
        return Err(Error::NonResonant { delta: drive.delta });
    }
    let a = 0.5 * relax.gamma() * drive.tau;
    let b = 0.5 * relax.big_gamma * drive.tau;
    DerivedBlochParams::from_dimensionless(drive.pulse_area(), a, b)
}

/// Excitation probability after one pulse without relaxation,
/// cos²χ · sin²(θ/2) with tan χ = Δ/Ω and θ = √(Ω²+Δ²)·τ.
///
/// Returns 0 when both Ω and Δ vanish.
pub fn excitation_probability_coherent(drive: &DriveParams) -> f64 {
    let generalized = drive.omega.hypot(drive.delta);
    if generalized == 0.0 {
        return 0.0;
    }
    let cos_chi = drive.omega / generalized;
    let half = 0.5 * generalized * drive.tau;
    cos_chi * cos_chi * half.sin().powi(2)
}

/// Probability that the next probe repeats the previous outcome `start`.
pub fn survival_probability(
    start: Outcome,
    drive: &DriveParams,
    relax: &RelaxationParams,
    f: &DegeneracyFactors,
) -> Result<f64> {
    derive_bloch_params(drive, relax)?.survival(start, f.for_start(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn zero_relaxation_limit() {
        let drive = DriveParams::new(2.0 * PI * 1e3, 0.0, 1e-3).unwrap();
        let p = derive_bloch_params(&drive, &RelaxationParams::none()).unwrap();
        assert_eq!((p.a, p.b, p.eps0, p.eps1), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(p.b0, 0.5);
        assert_abs_diff_eq!(p.theta, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn dimensionless_arithmetic() {
        let p = DerivedBlochParams::from_dimensionless(10.0, 3.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.theta, 96f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.theta, 9.7980, epsilon = 1e-4);
        assert_abs_diff_eq!(p.eps0.tan(), 0.40825, epsilon = 1e-5);
        // 2 − 2·100/124
        let tan1 = (2.0 - 200.0 / 124.0) / 96f64.sqrt();
        assert_abs_diff_eq!(p.eps1.tan(), tan1, epsilon = 1e-12);
        assert_abs_diff_eq!(p.b0, 50.0 / 112.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.b0 + p.b1, 1.0, epsilon = 0.0);
    }

    #[test]
    fn experimental_scale_theta_close_to_area() {
        // τ = 2 ms, a + b = 0.395 split evenly, Ωτ ≈ 640 revolutions
        let tau = 2e-3;
        let big_gamma = 2.0 * 0.1975 / tau;
        let gamma = 2.0 * 0.1975 / tau;
        let relax = RelaxationParams::new(big_gamma, gamma - 0.5 * big_gamma).unwrap();
        let drive = DriveParams::resonant_with_area(640.0 * 2.0 * PI, tau).unwrap();
        let p = derive_bloch_params(&drive, &relax).unwrap();
        assert_abs_diff_eq!(p.a + p.b, 0.395, epsilon = 1e-12);
        assert!(((p.theta - drive.pulse_area()) / drive.pulse_area()).abs() < 1e-7);
    }

    #[test]
    fn rejects_overdamped_and_detuned() {
        assert!(matches!(
            DerivedBlochParams::from_dimensionless(1.0, 3.0, 1.0),
            Err(Error::OverdampedRegime { .. })
        ));
        let drive = DriveParams::new(1.0, 0.1, 1.0).unwrap();
        assert!(matches!(
            derive_bloch_params(&drive, &RelaxationParams::none()),
            Err(Error::NonResonant { .. })
        ));
    }

    #[test]
    fn coherent_probability_examples() {
        let tau = 1e-3;
        assert_abs_diff_eq!(
            excitation_probability_coherent(&DriveParams::new(PI / tau, 0.0, tau).unwrap()),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(
            excitation_probability_coherent(&DriveParams::new(0.0, 0.0, tau).unwrap()),
            0.0
        );
        let omega = PI / SQRT_2 / tau;
        let symmetric = DriveParams::new(omega, omega, tau).unwrap();
        assert_abs_diff_eq!(
            excitation_probability_coherent(&symmetric),
            0.5,
            epsilon = 1e-15
        );
        let far = DriveParams::new(1e3, 1e9, tau).unwrap();
        assert!(excitation_probability_coherent(&far) < 1e-10);
    }

    #[test]
    fn survival_reduces_to_coherent_case() {
        let f = DegeneracyFactors::unity();
        let none = RelaxationParams::none();
        let pi_pulse = DriveParams::resonant_with_area(PI, 2e-3).unwrap();
        assert_abs_diff_eq!(
            survival_probability(Outcome::On, &pi_pulse, &none, &f).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let half = DriveParams::resonant_with_area(PI / 2.0, 2e-3).unwrap();
        assert_abs_diff_eq!(
            survival_probability(Outcome::On, &half, &none, &f).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn survival_flags_out_of_range() {
        let p = DerivedBlochParams::from_dimensionless(PI, 0.0, 0.0)
            .unwrap()
            .with_b0(0.9);
        assert!(matches!(
            p.survival(Outcome::On, 1.0),
            Err(Error::InvalidProbability { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(DriveParams::new(-1.0, 0.0, 1.0).is_err());
        assert!(DriveParams::new(1.0, 0.0, 0.0).is_err());
        assert!(RelaxationParams::new(-1.0, 0.0).is_err());
        assert!(DegeneracyFactors::new(0.0, 1.0).is_err());
        assert!(DegeneracyFactors::new(0.5, 1.5).is_err());
        let relax = RelaxationParams::new(2.0, 3.0).unwrap();
        assert_eq!(relax.gamma(), 4.0);
        assert_eq!(relax.diffusion_constant(), 6.0);
    }
}
