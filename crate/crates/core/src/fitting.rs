//! Parameter recovery from resonance contrast and from run-length ratios.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::bloch::DerivedBlochParams;
use crate::error::{invalid, Error, Result};
use crate::outcome::Outcome;
use crate::stats::{CurveParameter, ModelCurve, RunLengthHistogram};

/// (B₀, a + b) recovered from the extremes of p₀₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastFit {
    pub b0: f64,
    pub a_plus_b: f64,
}

/// Extremes f₀B₀(1 ± e^{−(a+b)}) of p₀₁ over θ in the large-θ limit.
pub fn contrast_extremes(b0: f64, a_plus_b: f64, f0: f64) -> (f64, f64) {
    let mean = f0 * b0;
    let swing = (-a_plus_b).exp();
    (mean * (1.0 + swing), mean * (1.0 - swing))
}

/// Inverts [`contrast_extremes`].
///
/// Dropping ε₀ costs a relative error of order ((a+b)/θ)² in the extremes,
/// about 10⁻⁸ at θ ≈ 640 turns.
pub fn fit_contrast(p_max: f64, p_min: f64, f0: f64) -> Result<ContrastFit> {
    if !(0.0..=1.0).contains(&p_max) || !(0.0..=1.0).contains(&p_min) {
        return Err(invalid("p_max", "extremes must lie in [0, 1]"));
    }
    if p_min > p_max {
        return Err(invalid(
            "p_min",
            format!("must not exceed p_max ({p_min} > {p_max})"),
        ));
    }
    if !(f0 > 0.0 && f0 <= 1.0) {
        return Err(invalid("f0", format!("must lie in (0, 1], got {f0}")));
    }
    let sum = p_max + p_min;
    if sum == 0.0 {
        return Err(Error::InfeasibleContrast {
            reason: "both extremes are zero".into(),
        });
    }
    let ratio = (p_max - p_min) / sum;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InfeasibleContrast {
            reason: format!("contrast ratio {ratio} outside (0, 1]; zero contrast means a + b → ∞"),
        });
    }
    let b0 = 0.5 * sum / f0;
    if b0 > 1.0 {
        return Err(Error::InfeasibleContrast {
            reason: format!("implied B₀ = {b0} exceeds 1"),
        });
    }
    Ok(ContrastFit {
        b0,
        a_plus_b: -ratio.ln(),
    })
}

/// Damped-nutation model of the two stay probabilities as functions of the
/// fractional phase θ′ and of f₁, with θ = 2πn + θ′.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLengthModel {
    pub a_plus_b: f64,
    /// a − b enters only through ε₁ at order 1/θ and cannot be determined
    /// from the data; 0 unless known.
    pub a_minus_b: f64,
    pub b0: f64,
    pub f0: f64,
    /// Whole revolutions n from the calibration.
    pub revolutions: u64,
}

#[derive(Debug, Clone, Copy)]
struct StayEval {
    p: [f64; 2],
    /// ∂p/∂θ′
    dp_dtheta: [f64; 2],
    /// ∂p₁/∂f₁
    dp1_df1: f64,
}

impl RunLengthModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_plus_b.is_finite() && self.a_plus_b >= 0.0) {
            return Err(invalid("a_plus_b", "must be finite and ≥ 0"));
        }
        if self.a_minus_b.is_nan() || self.a_minus_b.abs() > self.a_plus_b {
            return Err(invalid("a_minus_b", "|a − b| must not exceed a + b"));
        }
        if !(self.b0 > 0.0 && self.b0 < 1.0) {
            return Err(invalid(
                "b0",
                format!("must lie in (0, 1), got {}", self.b0),
            ));
        }
        if !(self.f0 > 0.0 && self.f0 <= 1.0) {
            return Err(invalid(
                "f0",
                format!("must lie in (0, 1], got {}", self.f0),
            ));
        }
        Ok(())
    }

    pub fn theta(&self, theta_prime: f64) -> f64 {
        TAU * self.revolutions as f64 + theta_prime
    }

    fn a_b(&self) -> (f64, f64) {
        (
            0.5 * (self.a_plus_b + self.a_minus_b),
            0.5 * (self.a_plus_b - self.a_minus_b),
        )
    }

    /// Full parameter bundle at θ′, with B₀ replaced by the fitted value.
    pub fn bloch_params(&self, theta_prime: f64) -> Result<DerivedBlochParams> {
        let (a, b) = self.a_b();
        Ok(DerivedBlochParams::from_theta(self.theta(theta_prime), a, b)?.with_b0(self.b0))
    }

    /// Stay probabilities (p₀, p₁).
    pub fn stay_probabilities(&self, theta_prime: f64, f1: f64) -> Result<(f64, f64)> {
        let e = self.eval(theta_prime, f1);
        for p in e.p {
            if !(-1e-12..=1.0 + 1e-12).contains(&p) {
                return Err(Error::InvalidProbability { value: p });
            }
        }
        Ok((e.p[0].clamp(0.0, 1.0), e.p[1].clamp(0.0, 1.0)))
    }

    // Uses A·cos(θ − ε) = e^{−(a+b)}(cos θ + tan ε · sin θ) and the periodicity
    // of θ in θ′ to avoid large-angle round-off.
    fn eval(&self, theta_prime: f64, f1: f64) -> StayEval {
        let (a, b) = self.a_b();
        let s = self.a_plus_b;
        let d = self.a_minus_b;
        let theta = self.theta(theta_prime);
        let (sin, cos) = theta_prime.sin_cos();
        let decay = (-s).exp();

        let t0 = s / theta;
        let dt0 = -s / (theta * theta);

        let k = theta * theta + d * d;
        let denom = k + 8.0 * a * b;
        let c1 = d - 2.0 * b * k / denom;
        let dc1 = -32.0 * a * b * b * theta / (denom * denom);
        let t1 = c1 / theta;
        let dt1 = dc1 / theta - c1 / (theta * theta);

        let g0 = decay * (cos + t0 * sin);
        let g1 = decay * (cos + t1 * sin);
        let dg0 = decay * (-sin + t0 * cos + dt0 * sin);
        let dg1 = decay * (-sin + t1 * cos + dt1 * sin);

        let b1 = 1.0 - self.b0;
        StayEval {
            p: [
                1.0 - self.f0 * self.b0 * (1.0 - g0),
                1.0 - f1 * b1 * (1.0 - g1),
            ],
            dp_dtheta: [self.f0 * self.b0 * dg0, f1 * b1 * dg1],
            dp1_df1: -b1 * (1.0 - g1),
        }
    }

    /// Model curves for "on" and "off" runs at (θ′, f₁).
    pub fn curves(
        &self,
        theta_prime: f64,
        f1: f64,
        n: usize,
        q_max: usize,
    ) -> Result<(ModelCurve, ModelCurve)> {
        let (p0, p1) = self.stay_probabilities(theta_prime, f1)?;
        Ok((
            crate::stats::model_curve(CurveParameter::Zeno { p: p0 }, Some(n), q_max)?,
            crate::stats::model_curve(CurveParameter::Zeno { p: p1 }, Some(n), q_max)?,
        ))
    }
}

/// Observed U(q)/U(1) values with their fit weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLengthData {
    pub on: BTreeMap<usize, (f64, f64)>,
    pub off: BTreeMap<usize, (f64, f64)>,
}

impl RunLengthData {
    /// Ratios with unit weights.
    pub fn from_ratios(on: &BTreeMap<usize, f64>, off: &BTreeMap<usize, f64>) -> Self {
        let unit = |m: &BTreeMap<usize, f64>| m.iter().map(|(&q, &r)| (q, (r, 1.0))).collect();
        Self {
            on: unit(on),
            off: unit(off),
        }
    }

    /// Ratios in the at-least convention (fraction of runs lasting ≥ q),
    /// weighted by the number of runs observed with length exactly q.
    ///
    /// Dividing by the exact-length count U(1) would shift every ratio by the
    /// same fluctuation of a single bin; the at-least fraction has the same
    /// expectation V(q−1) without that common-mode noise.
    pub fn from_histogram(hist: &RunLengthHistogram) -> Self {
        let side = |outcome| -> BTreeMap<usize, (f64, f64)> {
            let total = hist.at_least(outcome, 1);
            if total == 0 {
                return BTreeMap::new();
            }
            hist.counts(outcome)
                .iter()
                .map(|(&q, &c)| {
                    let ratio = hist.at_least(outcome, q) as f64 / total as f64;
                    (q, (ratio, c as f64))
                })
                .collect()
        };
        Self {
            on: side(Outcome::On),
            off: side(Outcome::Off),
        }
    }

    fn distinct_q(&self) -> usize {
        let mut qs: Vec<usize> = self.on.keys().chain(self.off.keys()).copied().collect();
        qs.sort_unstable();
        qs.dedup();
        qs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// θ′ and f₁ together on both outcome types.
    #[default]
    Joint,
    /// θ′ from "on" runs first, then f₁ from "off" runs at that θ′.
    TwoStage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    pub theta_step: f64,
    pub f1_step: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Number of grid minima handed to the local refinement.
    pub starts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::Joint,
            theta_step: 1e-3 * PI,
            f1_step: 0.01,
            gradient_tolerance: 1e-10,
            max_iterations: 500,
            starts: 4,
        }
    }
}

/// Outcome of a run-length fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: BTreeMap<String, f64>,
    /// Weighted sum of squared errors, weights normalized to unit sum.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after each accepted refinement step of the winning start.
    #[serde(skip)]
    pub residual_trace: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    pub fn theta_prime(&self) -> f64 {
        self.parameters["theta_prime"]
    }

    pub fn f1(&self) -> f64 {
        self.parameters["f1"]
    }
}

const F1_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Subset {
    Both,
    OnOnly,
    OffOnly,
}

struct Point {
    outcome: Outcome,
    q: usize,
    ratio: f64,
    weight: f64,
    finite: f64,
}

struct Objective<'a> {
    model: &'a RunLengthModel,
    points: Vec<Point>,
}

struct Eval {
    value: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

impl<'a> Objective<'a> {
    fn new(
        model: &'a RunLengthModel,
        data: &RunLengthData,
        n: usize,
        subset: Subset,
    ) -> Result<Self> {
        let mut points = Vec::new();
        let sides = [(Outcome::On, &data.on), (Outcome::Off, &data.off)];
        for (outcome, side) in sides {
            let keep = match subset {
                Subset::Both => true,
                Subset::OnOnly => outcome == Outcome::On,
                Subset::OffOnly => outcome == Outcome::Off,
            };
            if !keep {
                continue;
            }
            for (&q, &(ratio, weight)) in side {
                if q == 0 || q > n {
                    return Err(invalid("ratios", format!("run length {q} outside 1..={n}")));
                }
                if !(weight.is_finite() && weight >= 0.0 && ratio.is_finite()) {
                    return Err(invalid(
                        "ratios",
                        "ratios and weights must be finite, weights ≥ 0",
                    ));
                }
                points.push(Point {
                    outcome,
                    q,
                    ratio,
                    weight,
                    finite: (n - q + 1) as f64 / n as f64,
                });
            }
        }
        let total: f64 = points.iter().map(|p| p.weight).sum();
        if total > 0.0 {
            points.iter_mut().for_each(|p| p.weight /= total);
        }
        Ok(Self { model, points })
    }

    fn evaluate(&self, theta_prime: f64, f1: f64) -> Eval {
        let e = self.model.eval(theta_prime, f1);
        let invalid = e.p.iter().any(|p| !(-1e-12..=1.0 + 1e-12).contains(p));
        if invalid {
            return Eval {
                value: f64::INFINITY,
                grad: [0.0; 2],
                hess: [[0.0; 2]; 2],
            };
        }
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        for pt in &self.points {
            let i = match pt.outcome {
                Outcome::On => 0,
                Outcome::Off => 1,
            };
            let p = e.p[i].clamp(0.0, 1.0);
            let power = (pt.q - 1) as i32;
            let model = p.powi(power) * pt.finite;
            let dmodel_dp = if power == 0 {
                0.0
            } else {
                power as f64 * p.powi(power - 1) * pt.finite
            };
            let jac = [
                dmodel_dp * e.dp_dtheta[i],
                if i == 1 { dmodel_dp * e.dp1_df1 } else { 0.0 },
            ];
            let r = pt.ratio - model;
            value += pt.weight * r * r;
            for a in 0..2 {
                grad[a] -= 2.0 * pt.weight * r * jac[a];
                for b in 0..2 {
                    hess[a][b] += 2.0 * pt.weight * jac[a] * jac[b];
                }
            }
        }
        Eval { value, grad, hess }
    }
}

fn projected_gradient_norm(x: [f64; 2], grad: [f64; 2], free: [bool; 2]) -> f64 {
    let g0 = if free[0] { grad[0] } else { 0.0 };
    let g1 = if !free[1] || (x[1] >= 1.0 && grad[1] < 0.0) || (x[1] <= F1_FLOOR && grad[1] > 0.0) {
        0.0
    } else {
        grad[1]
    };
    g0.hypot(g1)
}

struct Refined {
    x: [f64; 2],
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Levenberg–Marquardt on (θ′, f₁) with f₁ kept inside its box. Only steps
/// that lower the objective are accepted.
fn refine(obj: &Objective, start: [f64; 2], free: [bool; 2], opts: &FitOptions) -> Result<Refined> {
    let mut x = start;
    let mut current = obj.evaluate(x[0], x[1]);
    let mut trace = vec![current.value];
    let mut lambda = 1e-3;
    for iteration in 0..opts.max_iterations {
        if projected_gradient_norm(x, current.grad, free) < opts.gradient_tolerance {
            return Ok(Refined {
                x,
                value: current.value,
                iterations: iteration,
                converged: true,
                trace,
            });
        }
        let mut accepted = false;
        while lambda < 1e30 {
            let mut h = current.hess;
            let mut g = current.grad;
            for i in 0..2 {
                if !free[i] {
                    h[i] = [0.0; 2];
                    h[0][i] = 0.0;
                    h[1][i] = 0.0;
                    h[i][i] = 1.0;
                    g[i] = 0.0;
                } else {
                    h[i][i] += lambda * h[i][i].max(1e-12);
                }
            }
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det == 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let step = [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ];
            let candidate = [x[0] + step[0], (x[1] + step[1]).clamp(F1_FLOOR, 1.0)];
            let next = obj.evaluate(candidate[0], candidate[1]);
            if next.value < current.value {
                assert!(
                    next.value <= current.value,
                    "refinement increased the residual"
                );
                x = candidate;
                current = next;
                trace.push(current.value);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no representable step lowers the objective any further
            let converged =
                projected_gradient_norm(x, current.grad, free) < opts.gradient_tolerance;
            return Ok(Refined {
                x,
                value: current.value,
                iterations: iteration + 1,
                converged,
                trace,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
    })
}

fn theta_grid(step: f64) -> Vec<f64> {
    let count = (TAU / step).round() as usize;
    (0..count).map(|k| k as f64 * step).collect()
}

fn f1_grid(step: f64) -> Vec<f64> {
    let count = (1.0 / step).round() as usize;
    (1..=count).map(|j| j as f64 / count as f64).collect()
}

/// Indices of circular local minima of `profile`, best first.
fn local_minima(profile: &[f64], limit: usize) -> Vec<usize> {
    let n = profile.len();
    let mut minima: Vec<usize> = (0..n)
        .filter(|&k| {
            let prev = profile[(k + n - 1) % n];
            let next = profile[(k + 1) % n];
            profile[k].is_finite() && profile[k] <= prev && profile[k] <= next
        })
        .collect();
    minima.sort_by(|&a, &b| profile[a].total_cmp(&profile[b]).then(a.cmp(&b)));
    minima.truncate(limit.max(1));
    minima
}

fn no_valid_start() -> Error {
    invalid(
        "model",
        "fixed parameters give no valid stay probabilities on the grid",
    )
}

fn best_of(candidates: Vec<Refined>) -> Option<Refined> {
    candidates
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
}

/// Fits θ′ ∈ [0, 2π) and f₁ ∈ (0, 1] to run-length ratios.
pub fn fit_run_lengths(
    data: &RunLengthData,
    model: &RunLengthModel,
    n: usize,
    opts: &FitOptions,
) -> Result<FitResult> {
    model.validate()?;
    let distinct = data.distinct_q();
    if distinct < 3 {
        return Err(Error::DataTooSparse { distinct });
    }
    if !(opts.theta_step > 0.0 && opts.f1_step > 0.0 && opts.f1_step <= 1.0) {
        return Err(invalid("grid", "grid steps must be positive"));
    }
    let thetas = theta_grid(opts.theta_step);
    let f1s = f1_grid(opts.f1_step);

    let (x, iterations, converged, trace) = match opts.mode {
        FitMode::Joint => {
            let obj = Objective::new(model, data, n, Subset::Both)?;
            let (profile, best_f1): (Vec<f64>, Vec<f64>) = thetas
                .iter()
                .map(|&t| {
                    f1s.iter()
                        .map(|&f| (obj.evaluate(t, f).value, f))
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .expect("non-empty f1 grid")
                })
                .unzip();
            let mut refined = Vec::new();
            let mut iterations = 0;
            for k in local_minima(&profile, opts.starts) {
                let r = refine(&obj, [thetas[k], best_f1[k]], [true, true], opts)?;
                iterations += r.iterations;
                refined.push(r);
            }
            let best = best_of(refined).ok_or_else(no_valid_start)?;
            (best.x, iterations, best.converged, best.trace)
        }
        FitMode::TwoStage => {
            let on = Objective::new(model, data, n, Subset::OnOnly)?;
            let profile: Vec<f64> = thetas.iter().map(|&t| on.evaluate(t, 1.0).value).collect();
            let mut refined = Vec::new();
            let mut iterations = 0;
            for k in local_minima(&profile, opts.starts) {
                let r = refine(&on, [thetas[k], 1.0], [true, false], opts)?;
                iterations += r.iterations;
                refined.push(r);
            }
            let stage1 = best_of(refined).ok_or_else(no_valid_start)?;
            let theta_prime = stage1.x[0];

            let off = Objective::new(model, data, n, Subset::OffOnly)?;
            let start_f1 = f1s
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    off.evaluate(theta_prime, a)
                        .value
                        .total_cmp(&off.evaluate(theta_prime, b).value)
                })
                .expect("non-empty f1 grid");
            let stage2 = refine(&off, [theta_prime, start_f1], [false, true], opts)?;
            (
                stage2.x,
                iterations + stage2.iterations,
                stage1.converged && stage2.converged,
                stage2.trace,
            )
        }
    };

    let theta_prime = x[0].rem_euclid(TAU);
    let f1 = x[1];
    let total = Objective::new(model, data, n, Subset::Both)?.evaluate(theta_prime, f1);
    let (p0, p1) = model.stay_probabilities(theta_prime, f1)?;
    let parameters = BTreeMap::from([
        ("theta_prime".to_string(), theta_prime),
        ("f1".to_string(), f1),
        ("a_plus_b".to_string(), model.a_plus_b),
        ("b0".to_string(), model.b0),
        ("f0".to_string(), model.f0),
        ("p0".to_string(), p0),
        ("p1".to_string(), p1),
    ]);
    Ok(FitResult {
        parameters,
        residual: total.value,
        iterations,
        converged,
        residual_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn measured_model() -> RunLengthModel {
        RunLengthModel {
            a_plus_b: 0.395,
            a_minus_b: 0.0,
            b0: 0.49,
            f0: 0.5,
            revolutions: 640,
        }
    }

    #[test]
    fn contrast_examples() {
        let (hi, lo) = contrast_extremes(0.49, 0.38, 0.5);
        assert_abs_diff_eq!(hi, 0.4126, epsilon = 1e-4);
        assert_abs_diff_eq!(lo, 0.0775, epsilon = 1e-4);
        let fit = fit_contrast(hi, lo, 0.5).unwrap();
        assert_abs_diff_eq!(fit.b0, 0.49, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.a_plus_b, 0.38, epsilon = 1e-14);

        let fit = fit_contrast(0.2, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(fit.a_plus_b, 3f64.ln(), epsilon = 1e-14);

        assert!(matches!(
            fit_contrast(0.3, 0.3, 0.5),
            Err(Error::InfeasibleContrast { .. })
        ));
        assert!(matches!(
            fit_contrast(0.0, 0.0, 0.5),
            Err(Error::InfeasibleContrast { .. })
        ));
        assert!(matches!(
            fit_contrast(0.1, 0.3, 0.5),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn stay_probabilities_match_closed_form() {
        let model = RunLengthModel {
            a_minus_b: -0.1,
            ..measured_model()
        };
        for theta_prime in [0.0, 0.7, PI, 4.0, 6.0] {
            let params = model.bloch_params(theta_prime).unwrap();
            let (p0, p1) = model.stay_probabilities(theta_prime, 0.8).unwrap();
            assert_abs_diff_eq!(
                p0,
                params.survival(Outcome::On, 0.5).unwrap(),
                epsilon = 1e-11
            );
            assert_abs_diff_eq!(
                p1,
                params.survival(Outcome::Off, 0.8).unwrap(),
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let model = RunLengthModel {
            a_minus_b: 0.2,
            ..measured_model()
        };
        let h = 1e-6;
        for theta_prime in [0.3, 2.0, 5.5] {
            let e = model.eval(theta_prime, 0.7);
            let plus = model.eval(theta_prime + h, 0.7);
            let minus = model.eval(theta_prime - h, 0.7);
            for i in 0..2 {
                assert_abs_diff_eq!(
                    e.dp_dtheta[i],
                    (plus.p[i] - minus.p[i]) / (2.0 * h),
                    epsilon = 1e-8
                );
            }
            let up = model.eval(theta_prime, 0.7 + h);
            let down = model.eval(theta_prime, 0.7 - h);
            assert_abs_diff_eq!(e.dp1_df1, (up.p[1] - down.p[1]) / (2.0 * h), epsilon = 1e-8);
        }
    }

    fn noiseless(
        model: &RunLengthModel,
        theta_prime: f64,
        f1: f64,
        n: usize,
        q_max: usize,
    ) -> RunLengthData {
        let (on, off) = model.curves(theta_prime, f1, n, q_max).unwrap();
        RunLengthData::from_ratios(&on.values, &off.values)
    }

    #[test]
    fn recovers_measured_values_from_noiseless_curves() {
        let model = measured_model();
        let truth = (1.0 + 1e-4) * PI;
        let data = noiseless(&model, truth, 1.0, 500, 8);
        let fit = fit_run_lengths(&data, &model, 500, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.theta_prime() - truth).abs() < 1e-3 * PI);
        assert!((fit.f1() - 1.0).abs() < 0.01);
        assert!(fit.residual_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn two_stage_mode() {
        let model = measured_model();
        let data = noiseless(&model, 2.2, 0.4, 500, 10);
        let opts = FitOptions {
            mode: FitMode::TwoStage,
            ..FitOptions::default()
        };
        let fit = fit_run_lengths(&data, &model, 500, &opts).unwrap();
        let mirrored = (2.0 * model.bloch_params(2.2).unwrap().eps0 - 2.2).rem_euclid(TAU);
        let err = (fit.theta_prime() - 2.2)
            .abs()
            .min((fit.theta_prime() - mirrored).abs());
        assert!(err < 1e-3 * PI, "θ′ = {}", fit.theta_prime());
        assert!((fit.f1() - 0.4).abs() < 0.01);
    }

    #[test]
    fn sparse_data_rejected() {
        let model = measured_model();
        let data = RunLengthData::from_ratios(&BTreeMap::from([(1, 1.0)]), &BTreeMap::new());
        assert!(matches!(
            fit_run_lengths(&data, &model, 500, &FitOptions::default()),
            Err(Error::DataTooSparse { distinct: 1 })
        ));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let model = measured_model();
        let data = noiseless(&model, 2.0, 0.6, 500, 8);
        let opts = FitOptions {
            max_iterations: 1,
            gradient_tolerance: 0.0,
            ..FitOptions::default()
        };
        assert!(matches!(
            fit_run_lengths(&data, &model, 500, &opts),
            Err(Error::NonConvergence { .. })
        ));
    }
}
