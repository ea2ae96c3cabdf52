//! Run-length statistics of probe records and the model curves they are
//! compared with.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::outcome::Outcome;
use crate::trajectory::{CoherentRunLaw, Model, Trajectory, NODE_TOLERANCE};

/// Estimate of the excitation probability p₀₁ with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P01Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Number of "on" outcomes at positions 1..N−1 (the denominator).
    pub on_events: u64,
    /// Number of on→off transitions (the numerator).
    pub transitions: u64,
}

/// On→off pairs divided by the number of "on" outcomes that have a successor.
pub fn estimate_p01(traj: &Trajectory) -> Result<f64> {
    Ok(estimate_p01_detailed(traj.outcomes())?.value)
}

pub fn estimate_p01_detailed(outcomes: &[Outcome]) -> Result<P01Estimate> {
    let mut on_events = 0u64;
    let mut transitions = 0u64;
    for pair in outcomes.windows(2) {
        if pair[0] == Outcome::On {
            on_events += 1;
            if pair[1] == Outcome::Off {
                transitions += 1;
            }
        }
    }
    if on_events == 0 {
        return Err(Error::NoOnEvents);
    }
    let value = transitions as f64 / on_events as f64;
    let std_error = (value * (1.0 - value) / on_events as f64).sqrt();
    Ok(P01Estimate {
        value,
        std_error,
        on_events,
        transitions,
    })
}

/// Maximal runs as (outcome, length) in record order.
pub fn runs(outcomes: &[Outcome]) -> Vec<(Outcome, usize)> {
    let mut out = Vec::new();
    let mut iter = outcomes.iter().copied();
    let Some(mut current) = iter.next() else {
        return out;
    };
    let mut len = 1;
    for o in iter {
        if o == current {
            len += 1;
        } else {
            out.push((current, len));
            current = o;
            len = 1;
        }
    }
    out.push((current, len));
    out
}

/// Counts of maximal runs of each exact length, per outcome.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLengthHistogram {
    pub n_measurements: u64,
    pub counts_on: BTreeMap<usize, u64>,
    pub counts_off: BTreeMap<usize, u64>,
}

impl RunLengthHistogram {
    pub fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let mut hist = Self {
            n_measurements: outcomes.len() as u64,
            ..Self::default()
        };
        for (o, len) in runs(outcomes) {
            *hist.counts_mut(o).entry(len).or_insert(0) += 1;
        }
        hist
    }

    pub fn counts(&self, outcome: Outcome) -> &BTreeMap<usize, u64> {
        match outcome {
            Outcome::On => &self.counts_on,
            Outcome::Off => &self.counts_off,
        }
    }

    fn counts_mut(&mut self, outcome: Outcome) -> &mut BTreeMap<usize, u64> {
        match outcome {
            Outcome::On => &mut self.counts_on,
            Outcome::Off => &mut self.counts_off,
        }
    }

    /// Accumulates another histogram; order of merging does not matter.
    pub fn merge(&mut self, other: &Self) {
        self.n_measurements += other.n_measurements;
        for outcome in [Outcome::On, Outcome::Off] {
            let target = self.counts_mut(outcome);
            for (&q, &c) in other.counts(outcome) {
                *target.entry(q).or_insert(0) += c;
            }
        }
    }

    /// Σ q·count over both outcomes; equals `n_measurements` for a single record.
    pub fn weighted_total(&self) -> u64 {
        self.counts_on
            .iter()
            .chain(&self.counts_off)
            .map(|(&q, &c)| q as u64 * c)
            .sum()
    }

    pub fn max_run(&self) -> usize {
        self.counts_on
            .keys()
            .chain(self.counts_off.keys())
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn total_runs(&self, outcome: Outcome) -> u64 {
        self.counts(outcome).values().sum()
    }

    /// Number of runs of length ≥ q.
    pub fn at_least(&self, outcome: Outcome, q: usize) -> u64 {
        self.counts(outcome).range(q..).map(|(_, &c)| c).sum()
    }
}

pub fn run_length_histogram(traj: &Trajectory) -> RunLengthHistogram {
    RunLengthHistogram::from_outcomes(traj.outcomes())
}

/// How U(q) is read off the histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunCounting {
    /// Runs of length exactly q.
    #[default]
    Exact,
    /// Runs of length q or longer.
    AtLeast,
}

/// U(q)/U(1) for every q with a nonzero count (exact-length convention).
pub fn normalized_ratios(
    hist: &RunLengthHistogram,
    outcome: Outcome,
) -> Result<BTreeMap<usize, f64>> {
    normalized_ratios_with(hist, outcome, RunCounting::Exact)
}

pub fn normalized_ratios_with(
    hist: &RunLengthHistogram,
    outcome: Outcome,
    counting: RunCounting,
) -> Result<BTreeMap<usize, f64>> {
    let counts = hist.counts(outcome);
    let unit = counts.get(&1).copied().unwrap_or(0);
    if unit == 0 {
        return Err(Error::NoUnitRuns);
    }
    Ok(match counting {
        RunCounting::Exact => counts
            .iter()
            .map(|(&q, &c)| (q, c as f64 / unit as f64))
            .collect(),
        RunCounting::AtLeast => {
            let base = hist.at_least(outcome, 1) as f64;
            counts
                .keys()
                .map(|&q| (q, hist.at_least(outcome, q) as f64 / base))
                .collect()
        }
    })
}

/// Model parameter for [`model_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum CurveParameter {
    /// Stay probability p of the geometric law.
    Zeno { p: f64 },
    /// Pulse area Ωτ of uninterrupted nutation.
    Coherent { omega_tau: f64 },
}

impl CurveParameter {
    pub fn model(&self) -> Model {
        match self {
            CurveParameter::Zeno { .. } => Model::Zeno,
            CurveParameter::Coherent { .. } => Model::Coherent,
        }
    }

    /// V(q) without the finite-record factor.
    pub fn v(&self, q: usize) -> f64 {
        match *self {
            CurveParameter::Zeno { p } => p.powi(q as i32),
            CurveParameter::Coherent { omega_tau } => CoherentRunLaw::new(omega_tau).v(q),
        }
    }
}

/// Predicted U(q)/U(1) = V(q−1)·(N−q+1)/N for q = 1..=q_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurve {
    pub parameter: CurveParameter,
    /// Record length; `None` is the N → ∞ limit without the finite factor.
    pub n_measurements: Option<usize>,
    pub values: BTreeMap<usize, f64>,
}

impl ModelCurve {
    pub fn model(&self) -> Model {
        self.parameter.model()
    }

    pub fn q_max(&self) -> usize {
        self.values.keys().next_back().copied().unwrap_or(0)
    }

    pub fn get(&self, q: usize) -> Option<f64> {
        self.values.get(&q).copied()
    }
}

/// Evaluates the model curve for a record of `n` measurements (or the N → ∞
/// limit when `n` is `None`).
pub fn model_curve(
    parameter: CurveParameter,
    n: Option<usize>,
    q_max: usize,
) -> Result<ModelCurve> {
    if q_max == 0 {
        return Err(invalid("q_max", "must be ≥ 1"));
    }
    match parameter {
        CurveParameter::Zeno { p } if !(0.0..=1.0).contains(&p) => {
            return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
        }
        CurveParameter::Coherent { omega_tau } if !omega_tau.is_finite() => {
            return Err(invalid("omega_tau", "must be finite"));
        }
        _ => {}
    }
    if let Some(n) = n {
        if n < q_max {
            return Err(invalid(
                "q_max",
                format!("must not exceed N = {n}, got {q_max}"),
            ));
        }
    }
    let values = (1..=q_max)
        .map(|q| {
            let finite = n.map_or(1.0, |n| (n - q + 1) as f64 / n as f64);
            (q, parameter.v(q - 1) * finite)
        })
        .collect();
    Ok(ModelCurve {
        parameter,
        n_measurements: n,
        values,
    })
}

/// Per-run log-likelihoods of the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    pub log_likelihood_zeno: f64,
    pub log_likelihood_coherent: f64,
    /// ln L_zeno − ln L_coherent; positive favours the Zeno model.
    pub log_ratio: f64,
    pub preferred: Model,
    pub runs: u64,
}

/// Run-length distribution implied by a model curve.
///
/// The curve is read as the survival function P(length ≥ q), made monotone by
/// taking its running minimum and cut to zero at its first node, so that
/// P(length = q) = S(q) − S(q+1). Beyond a finite record S vanishes.
#[derive(Debug, Clone)]
struct RunLengthLaw {
    survival: Vec<f64>,
    record: Option<usize>,
}

impl RunLengthLaw {
    fn from_curve(curve: &ModelCurve) -> Self {
        let mut survival = Vec::with_capacity(curve.values.len());
        let mut s = f64::INFINITY;
        for (expected_q, (&q, &value)) in (1..).zip(&curve.values) {
            if q != expected_q {
                break;
            }
            s = if value <= NODE_TOLERANCE {
                0.0
            } else {
                s.min(value)
            };
            survival.push(s);
        }
        if let Some(&first) = survival.first() {
            if first > 0.0 {
                survival.iter_mut().for_each(|x| *x /= first);
            }
        }
        Self {
            survival,
            record: curve.n_measurements,
        }
    }

    fn survival_at(&self, q: usize) -> Result<f64> {
        if let Some(n) = self.record {
            if q > n {
                return Ok(0.0);
            }
        }
        self.survival
            .get(q - 1)
            .copied()
            .ok_or(Error::CurveTooShort {
                needed: q,
                available: self.survival.len(),
            })
    }

    fn probability(&self, q: usize) -> Result<f64> {
        Ok((self.survival_at(q)? - self.survival_at(q + 1)?).max(0.0))
    }
}

fn laws_identical(a: &RunLengthLaw, b: &RunLengthLaw) -> bool {
    a.record == b.record
        && a.survival.len() == b.survival.len()
        && a.survival
            .iter()
            .zip(&b.survival)
            .all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Compares the Zeno and coherent hypotheses on all runs of the histogram,
/// scoring "on" and "off" runs with the same pair of curves.
pub fn discriminate(
    hist: &RunLengthHistogram,
    zeno: &ModelCurve,
    coherent: &ModelCurve,
) -> Result<Discrimination> {
    discriminate_by_outcome(hist, [zeno, zeno], [coherent, coherent])
}

/// As [`discriminate`], with separate curves for "on" (index 0) and "off"
/// (index 1) runs.
pub fn discriminate_by_outcome(
    hist: &RunLengthHistogram,
    zeno: [&ModelCurve; 2],
    coherent: [&ModelCurve; 2],
) -> Result<Discrimination> {
    let zeno_laws = zeno.map(RunLengthLaw::from_curve);
    let coherent_laws = coherent.map(RunLengthLaw::from_curve);
    if zeno_laws
        .iter()
        .zip(&coherent_laws)
        .all(|(z, c)| laws_identical(z, c))
    {
        return Err(Error::DegenerateModels);
    }
    let mut ll_zeno = 0.0;
    let mut ll_coherent = 0.0;
    let mut total = 0;
    for (i, outcome) in [Outcome::On, Outcome::Off].into_iter().enumerate() {
        let (zeno_law, coherent_law) = (&zeno_laws[i], &coherent_laws[i]);
        for (&q, &count) in hist.counts(outcome) {
            if count == 0 {
                continue;
            }
            let pz = zeno_law.probability(q)?;
            let pc = coherent_law.probability(q)?;
            if pz == 0.0 && pc == 0.0 {
                return Err(Error::ZeroLikelihoodBothModels { run_length: q });
            }
            ll_zeno += count as f64 * pz.ln();
            ll_coherent += count as f64 * pc.ln();
            total += count;
        }
    }
    let log_ratio = ll_zeno - ll_coherent;
    Ok(Discrimination {
        log_likelihood_zeno: ll_zeno,
        log_likelihood_coherent: ll_coherent,
        log_ratio,
        preferred: if log_ratio > 0.0 {
            Model::Zeno
        } else {
            Model::Coherent
        },
        runs: total,
    })
}
