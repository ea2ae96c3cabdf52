//! Numerical integration of the optical Bloch equations.
//!
//! This path is independent of the closed-form solution and exists to check
//! it. The integrator is an adaptive Dormand–Prince 5(4) pair with absolute
//! local error control.

use serde::{Deserialize, Serialize};

use super::{DriveParams, RelaxationParams};
use crate::error::{invalid, Error, Result};
use crate::outcome::Outcome;

/// Bloch vector (u, v, w); `w = −1` is the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochState {
    pub const GROUND: Self = Self {
        u: 0.0,
        v: 0.0,
        w: -1.0,
    };
    pub const EXCITED: Self = Self {
        u: 0.0,
        v: 0.0,
        w: 1.0,
    };

    pub fn for_outcome(outcome: Outcome) -> Self {
        match outcome {
            Outcome::On => Self::GROUND,
            Outcome::Off => Self::EXCITED,
        }
    }

    pub fn length_squared(&self) -> f64 {
        self.u * self.u + self.v * self.v + self.w * self.w
    }

    /// Population of the upper level, (1 + w)/2.
    pub fn excited_population(&self) -> f64 {
        0.5 * (1.0 + self.w)
    }

    fn axpy(&self, h: f64, k: &Self) -> Self {
        Self {
            u: self.u + h * k.u,
            v: self.v + h * k.v,
            w: self.w + h * k.w,
        }
    }
}

/// Rates entering the Bloch equations, all in 1/s (or rad/s).
///
/// Unlike [`RelaxationParams`], the transverse rate γ is given directly, which
/// allows probing any (a, b) pair including ones with γ < Γ/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochRates {
    pub omega: f64,
    pub delta: f64,
    pub gamma: f64,
    pub big_gamma: f64,
}

impl BlochRates {
    pub fn new(drive: &DriveParams, relax: &RelaxationParams) -> Self {
        Self {
            omega: drive.omega,
            delta: drive.delta,
            gamma: relax.gamma(),
            big_gamma: relax.big_gamma,
        }
    }

    /// Resonant rates in units where τ = 1: Ω = Ωτ, γ = 2a, Γ = 2b.
    pub fn from_dimensionless(omega_tau: f64, a: f64, b: f64) -> Self {
        Self {
            omega: omega_tau,
            delta: 0.0,
            gamma: 2.0 * a,
            big_gamma: 2.0 * b,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("omega", self.omega),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("big_gamma", self.big_gamma),
        ] {
            if !x.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.gamma < 0.0 || self.big_gamma < 0.0 {
            return Err(invalid("gamma", "relaxation rates must be ≥ 0"));
        }
        Ok(())
    }

    fn derivative(&self, s: &BlochState) -> BlochState {
        BlochState {
            u: -self.gamma * s.u + self.delta * s.v,
            v: -self.gamma * s.v - self.delta * s.u + self.omega * s.w,
            w: -self.omega * s.v - self.big_gamma * (s.w + 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Upper bound on the estimated local error per step (max norm).
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_steps: 50_000_000,
        }
    }
}

// autonomous system: the node offsets c_i are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Integrator<'a> {
    rates: &'a BlochRates,
    opts: OdeOptions,
    h: f64,
    steps: usize,
}

impl<'a> Integrator<'a> {
    fn new(rates: &'a BlochRates, opts: OdeOptions) -> Self {
        let scale = rates.omega.abs() + rates.delta.abs() + rates.gamma + rates.big_gamma;
        let h = if scale > 0.0 { 0.01 / scale } else { 1.0 };
        Self {
            rates,
            opts,
            h,
            steps: 0,
        }
    }

    /// Advances `y` from `t0` to `t1`, landing exactly on `t1`.
    fn advance(&mut self, mut y: BlochState, t0: f64, t1: f64) -> Result<BlochState> {
        let mut t = t0;
        let f = |s: &BlochState| self.rates.derivative(s);
        let mut k1 = f(&y);
        while t < t1 {
            if self.steps >= self.opts.max_steps {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("step budget of {} exhausted", self.opts.max_steps),
                });
            }
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            if h <= f64::EPSILON * t.abs().max(1e-300) {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "step size underflow".into(),
                });
            }

            let k2 = f(&y.axpy(h * A21, &k1));
            let y3 = BlochState {
                u: y.u + h * (A31 * k1.u + A32 * k2.u),
                v: y.v + h * (A31 * k1.v + A32 * k2.v),
                w: y.w + h * (A31 * k1.w + A32 * k2.w),
            };
            let k3 = f(&y3);
            let y4 = BlochState {
                u: y.u + h * (A41 * k1.u + A42 * k2.u + A43 * k3.u),
                v: y.v + h * (A41 * k1.v + A42 * k2.v + A43 * k3.v),
                w: y.w + h * (A41 * k1.w + A42 * k2.w + A43 * k3.w),
            };
            let k4 = f(&y4);
            let y5 = BlochState {
                u: y.u + h * (A51 * k1.u + A52 * k2.u + A53 * k3.u + A54 * k4.u),
                v: y.v + h * (A51 * k1.v + A52 * k2.v + A53 * k3.v + A54 * k4.v),
                w: y.w + h * (A51 * k1.w + A52 * k2.w + A53 * k3.w + A54 * k4.w),
            };
            let k5 = f(&y5);
            let y6 = BlochState {
                u: y.u + h * (A61 * k1.u + A62 * k2.u + A63 * k3.u + A64 * k4.u + A65 * k5.u),
                v: y.v + h * (A61 * k1.v + A62 * k2.v + A63 * k3.v + A64 * k4.v + A65 * k5.v),
                w: y.w + h * (A61 * k1.w + A62 * k2.w + A63 * k3.w + A64 * k4.w + A65 * k5.w),
            };
            let k6 = f(&y6);
            let y_new = BlochState {
                u: y.u + h * (B1 * k1.u + B3 * k3.u + B4 * k4.u + B5 * k5.u + B6 * k6.u),
                v: y.v + h * (B1 * k1.v + B3 * k3.v + B4 * k4.v + B5 * k5.v + B6 * k6.v),
                w: y.w + h * (B1 * k1.w + B3 * k3.w + B4 * k4.w + B5 * k5.w + B6 * k6.w),
            };
            let k7 = f(&y_new);

            let err_u = h * (E1 * k1.u + E3 * k3.u + E4 * k4.u + E5 * k5.u + E6 * k6.u + E7 * k7.u);
            let err_v = h * (E1 * k1.v + E3 * k3.v + E4 * k4.v + E5 * k5.v + E6 * k6.v + E7 * k7.v);
            let err_w = h * (E1 * k1.w + E3 * k3.w + E4 * k4.w + E5 * k5.w + E6 * k6.w + E7 * k7.w);
            let err = err_u.abs().max(err_v.abs()).max(err_w.abs()) / self.opts.tolerance;
            self.steps += 1;

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y = y_new;
                k1 = k7;
                // a truncated final step says nothing about the natural step size
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor.min(1.0);
            }
        }
        Ok(y)
    }
}

/// Integrates the Bloch equations with explicit rates from `initial` over `t_end`.
pub fn evolve_with_rates(
    initial: BlochState,
    rates: &BlochRates,
    t_end: f64,
    opts: OdeOptions,
) -> Result<BlochState> {
    rates.validate()?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(invalid(
            "t_end",
            format!("must be finite and ≥ 0, got {t_end}"),
        ));
    }
    Integrator::new(rates, opts).advance(initial, 0.0, t_end)
}

/// Integrates u̇ = −γu + Δv, v̇ = −γv − Δu + Ωw, ẇ = −Ωv − Γ(w+1).
pub fn ode_oracle_evolve(
    initial: BlochState,
    drive: &DriveParams,
    relax: &RelaxationParams,
    t_end: f64,
) -> Result<BlochState> {
    drive.validate()?;
    relax.validate()?;
    evolve_with_rates(
        initial,
        &BlochRates::new(drive, relax),
        t_end,
        OdeOptions::default(),
    )
}

/// States at each of the (non-decreasing) output `times`.
pub fn ode_oracle_trajectory(
    initial: BlochState,
    rates: &BlochRates,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<BlochState>> {
    rates.validate()?;
    let mut integrator = Integrator::new(rates, opts);
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut y = initial;
    for &next in times {
        if !(next.is_finite() && next >= t) {
            return Err(invalid(
                "times",
                "output times must be finite and non-decreasing from 0",
            ));
        }
        y = integrator.advance(y, t, next)?;
        t = next;
        out.push(y);
    }
    Ok(out)
}

/// Probability that a probe after time `t_end` yields the same outcome as
/// `start`, obtained by integration (the numerical counterpart of the
/// closed-form survival probability with f = 1).
pub fn ode_transition_probability(
    start: Outcome,
    rates: &BlochRates,
    t_end: f64,
    opts: OdeOptions,
) -> Result<f64> {
    let end = evolve_with_rates(BlochState::for_outcome(start), rates, t_end, opts)?;
    Ok(match start {
        Outcome::On => 1.0 - end.excited_population(),
        Outcome::Off => end.excited_population(),
    })
}
