use thiserror::Error;

/// Errors raised by the physics and statistics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("overdamped regime: (Ωτ)² = {omega_tau_sq} does not exceed (a−b)² = {damping_sq}")]
    OverdampedRegime { omega_tau_sq: f64, damping_sq: f64 },

    #[error("closed-form survival holds on resonance only (detuning = {delta} rad/s)")]
    NonResonant { delta: f64 },

    #[error("probability {value} lies outside [0, 1]")]
    InvalidProbability { value: f64 },

    #[error("ODE integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("negative phase variance (2a − b = {value})")]
    NegativeVariance { value: f64 },

    #[error("the coherent model requires zero relaxation (Γ = {big_gamma}, γ_ph = {gamma_ph})")]
    CoherentModeRequiresNoRelaxation { big_gamma: f64, gamma_ph: f64 },

    #[error("trajectory must contain at least one measurement")]
    EmptyTrajectory,

    #[error("no \"on\" outcome among the first N−1 measurements")]
    NoOnEvents,

    #[error("no runs of length 1 for the selected outcome")]
    NoUnitRuns,

    #[error("model curves are identical; the models cannot be discriminated")]
    DegenerateModels,

    #[error("observed run of length {run_length} is impossible under both models")]
    ZeroLikelihoodBothModels { run_length: usize },

    #[error("model curve covers q ≤ {available}, but q = {needed} is required")]
    CurveTooShort { needed: usize, available: usize },

    #[error("no branch of the nutation increment yields a positive θ")]
    NoPositiveCandidate,

    #[error("infeasible contrast: {reason}")]
    InfeasibleContrast { reason: String },

    #[error("fit refinement did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("fit needs at least 3 distinct run lengths, got {distinct}")]
    DataTooSparse { distinct: usize },
}

impl Error {
    /// True for errors that signal a physics-domain violation rather than
    /// malformed input.
    pub fn is_domain(&self) -> bool {
        !matches!(
            self,
            Error::InvalidParameter { .. } | Error::EmptyTrajectory
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
