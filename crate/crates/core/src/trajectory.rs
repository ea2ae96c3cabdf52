//! Synthetic probe records under two rival hypotheses.
//!
//! * **Zeno**: every probe projects the ion onto an eigenstate, so the record
//!   is a two-state Markov chain with stay probabilities p₀ (on) and p₁ (off).
//! * **Coherent**: no projection; the probability that a run survives q more
//!   pulses follows cos²(qΩτ/2) until its first node, after which a new run
//!   starts from scratch.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::{derive_bloch_params, DegeneracyFactors, DriveParams, RelaxationParams};
use crate::error::{invalid, Error, Result};
use crate::outcome::Outcome;

/// Name of the pseudorandom generator, recorded in trajectory headers.
pub const GENERATOR_NAME: &str = "chacha8-u64-stream/v1";

/// Values of V at or below this count as exact nodes of cos².
pub const NODE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Zeno,
    Coherent,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Zeno => "zeno",
            Model::Coherent => "coherent",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "zeno" => Ok(Model::Zeno),
            "coherent" => Ok(Model::Coherent),
            other => Err(format!(
                "expected \"zeno\" or \"coherent\", found {other:?}"
            )),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Uniform draws on [0, 1) indexed by measurement number.
///
/// Draw k is built from the k-th 64-bit word of the ChaCha8 keystream keyed by
/// the seed, so any draw can be regenerated directly with [`uniform_at`].
#[derive(Debug, Clone)]
pub struct MeasurementRng {
    inner: ChaCha8Rng,
}

impl MeasurementRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        to_unit_interval(self.inner.next_u64())
    }
}

/// The `index`-th draw of the stream for `seed`.
pub fn uniform_at(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * index as u128);
    to_unit_interval(rng.next_u64())
}

fn to_unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// An ordered record of probe outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub model: Model,
    outcomes: Vec<Outcome>,
}

impl Trajectory {
    pub fn new(seed: u64, model: Model, outcomes: Vec<Outcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        Ok(Self {
            seed,
            model,
            outcomes,
        })
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn into_outcomes(self) -> Vec<Outcome> {
        self.outcomes
    }
}

/// Physical settings of one simulated measurement series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub drive: DriveParams,
    pub relax: RelaxationParams,
    pub degeneracy: DegeneracyFactors,
    /// Probe pulse length in s; recorded only.
    pub probe_duration: f64,
    pub n_measurements: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.relax.validate()?;
        DegeneracyFactors::new(self.degeneracy.f0, self.degeneracy.f1)?;
        if !(self.probe_duration.is_finite() && self.probe_duration >= 0.0) {
            return Err(invalid("probe_duration", "must be finite and ≥ 0"));
        }
        if self.n_measurements == 0 {
            return Err(invalid("n_measurements", "must be ≥ 1"));
        }
        Ok(())
    }

    /// Stay probabilities (p₀, p₁) for the Zeno chain.
    pub fn stay_probabilities(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let params = derive_bloch_params(&self.drive, &self.relax)?;
        let p0 = params.survival(Outcome::On, self.degeneracy.f0)?;
        let p1 = params.survival(Outcome::Off, self.degeneracy.f1)?;
        Ok((p0.clamp(0.0, 1.0), p1.clamp(0.0, 1.0)))
    }
}

/// One step of the two-state chain driven by a uniform draw in [0, 1).
pub fn zeno_step(current: Outcome, p0: f64, p1: f64, draw: f64) -> Outcome {
    let stay = match current {
        Outcome::On => p0,
        Outcome::Off => p1,
    };
    if draw < stay {
        current
    } else {
        current.flipped()
    }
}

/// Stationary probability of "on" for the chain with stay probabilities p₀, p₁.
///
/// When both states are absorbing the chain has no unique stationary law;
/// "on" is returned so the record starts in the ground state.
pub fn stationary_on_probability(p0: f64, p1: f64) -> f64 {
    let leave_on = 1.0 - p0;
    let leave_off = 1.0 - p1;
    if leave_on + leave_off == 0.0 {
        1.0
    } else {
        leave_off / (leave_on + leave_off)
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in [0, 1], got {p}")))
    }
}

/// Zeno-model record with explicit stay probabilities.
pub fn simulate_zeno_with(p0: f64, p1: f64, n: usize, seed: u64) -> Result<Trajectory> {
    check_probability("p0", p0)?;
    check_probability("p1", p1)?;
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut rng = MeasurementRng::new(seed);
    let first = if rng.next_uniform() < stationary_on_probability(p0, p1) {
        Outcome::On
    } else {
        Outcome::Off
    };
    let mut outcomes = Vec::with_capacity(n);
    outcomes.push(first);
    let mut current = first;
    for _ in 1..n {
        current = zeno_step(current, p0, p1, rng.next_uniform());
        outcomes.push(current);
    }
    Trajectory::new(seed, Model::Zeno, outcomes)
}

/// Zeno-model record with p₀, p₁ from the damped-nutation solution.
pub fn simulate_zeno(config: &ExperimentConfig, seed: u64) -> Result<Trajectory> {
    let (p0, p1) = config.stay_probabilities()?;
    simulate_zeno_with(p0, p1, config.n_measurements, seed)
}

/// Run survival law of the coherent model.
///
/// `survival(q)` is the probability that a run reaches length ≥ q: it equals
/// V(q−1) = cos²((q−1)Ωτ/2) while V decreases, stays at its running minimum
/// afterwards, and drops to zero for good at the first node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentRunLaw {
    pub omega_tau: f64,
}

impl CoherentRunLaw {
    pub fn new(omega_tau: f64) -> Self {
        Self { omega_tau }
    }

    /// V(q) = cos²(qΩτ/2).
    pub fn v(&self, q: usize) -> f64 {
        (0.5 * q as f64 * self.omega_tau).cos().powi(2)
    }

    /// Survival probabilities S(1..=q_max); index 0 holds S(1) = 1.
    pub fn survival(&self, q_max: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(q_max);
        let mut s = 1.0;
        for q in 1..=q_max {
            out.push(s);
            s = self.next_survival(s, q);
        }
        out
    }

    fn next_survival(&self, s: f64, q: usize) -> f64 {
        let v = self.v(q);
        if v <= NODE_TOLERANCE {
            0.0
        } else {
            s.min(v)
        }
    }
}

/// Coherent-model record for pulse area Ωτ, starting in the ground state.
pub fn simulate_coherent_with(omega_tau: f64, n: usize, seed: u64) -> Result<Trajectory> {
    if !omega_tau.is_finite() {
        return Err(invalid("omega_tau", "must be finite"));
    }
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let law = CoherentRunLaw::new(omega_tau);
    let mut rng = MeasurementRng::new(seed);
    let mut outcomes = Vec::with_capacity(n);
    let mut current = Outcome::On;
    outcomes.push(current);
    let mut run = 1usize;
    let mut survival = 1.0;
    for _ in 1..n {
        let next = law.next_survival(survival, run);
        let draw = rng.next_uniform();
        if draw * survival < next {
            run += 1;
            survival = next;
        } else {
            current = current.flipped();
            run = 1;
            survival = 1.0;
        }
        outcomes.push(current);
    }
    Trajectory::new(seed, Model::Coherent, outcomes)
}

/// Coherent-model record; requires a relaxation-free configuration.
pub fn simulate_coherent(config: &ExperimentConfig, seed: u64) -> Result<Trajectory> {
    config.validate()?;
    if !config.relax.is_zero() {
        return Err(Error::CoherentModeRequiresNoRelaxation {
            big_gamma: config.relax.big_gamma,
            gamma_ph: config.relax.gamma_ph,
        });
    }
    simulate_coherent_with(config.drive.pulse_area(), config.n_measurements, seed)
}

/// Dispatches on `model`.
pub fn simulate(config: &ExperimentConfig, model: Model, seed: u64) -> Result<Trajectory> {
    match model {
        Model::Zeno => simulate_zeno(config, seed),
        Model::Coherent => simulate_coherent(config, seed),
    }
}
