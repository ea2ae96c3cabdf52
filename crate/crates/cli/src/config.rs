//! Experiment configuration files (TOML).
//!
//! ```toml
//! [drive]
//! omega_hz = 289000        # or omega_rad_per_s
//! detuning_rad_per_s = 0   # or detuning_hz
//! tau_s = 2e-3
//!
//! [relax]
//! big_gamma_per_s = 0
//! gamma_ph_per_s = 395
//!
//! [degeneracy]
//! f0 = 0.5
//! f1 = 1.0
//!
//! [probe]
//! tau_p_s = 10e-3
//!
//! [run]
//! n_measurements = 500
//! seed = 42
//! model = "zeno"
//! ```
//!
//! Only the drive frequency is required; everything else defaults to the
//! values above (τ = 2 ms, τ_p = 10 ms, N = 500, f₀ = 1/2). Keys ending in
//! `_hz` are converted to rad/s on parse.

use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use zeno_core::bloch::{DegeneracyFactors, DriveParams, RelaxationParams};
use zeno_core::trajectory::{ExperimentConfig, Model};

use crate::error::{CliError, CliResult};

pub const DEFAULT_TAU_S: f64 = 2e-3;
pub const DEFAULT_TAU_P_S: f64 = 10e-3;
pub const DEFAULT_N_MEASUREMENTS: usize = 500;
pub const DEFAULT_F0: f64 = 0.5;
pub const DEFAULT_F1: f64 = 1.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    drive: RawDrive,
    #[serde(default)]
    relax: RawRelax,
    #[serde(default)]
    degeneracy: RawDegeneracy,
    #[serde(default)]
    probe: RawProbe,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    omega_rad_per_s: Option<f64>,
    omega_hz: Option<f64>,
    detuning_rad_per_s: Option<f64>,
    detuning_hz: Option<f64>,
    tau_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelax {
    big_gamma_per_s: Option<f64>,
    gamma_ph_per_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDegeneracy {
    f0: Option<f64>,
    f1: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    tau_p_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    n_measurements: Option<usize>,
    seed: Option<u64>,
    model: Option<String>,
}

/// A parsed configuration: physics plus run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub experiment: ExperimentConfig,
    pub seed: u64,
    pub model: Model,
}

/// Picks the rad/s key or converts the Hz key; at most one may be set.
fn angular(
    rad: Option<f64>,
    hz: Option<f64>,
    rad_key: &str,
    hz_key: &str,
) -> CliResult<Option<f64>> {
    match (rad, hz) {
        (Some(_), Some(_)) => Err(CliError::input(format!(
            "{rad_key} and {hz_key} are mutually exclusive"
        ))),
        (Some(r), None) => Ok(Some(r)),
        (None, Some(h)) => Ok(Some(TAU * h)),
        (None, None) => Ok(None),
    }
}

/// Config key corresponding to a parameter name reported by the core crate.
fn key_for(param: &str) -> &'static str {
    match param {
        "omega" => "drive.omega_rad_per_s",
        "delta" => "drive.detuning_rad_per_s",
        "tau" => "drive.tau_s",
        "big_gamma" => "relax.big_gamma_per_s",
        "gamma_ph" => "relax.gamma_ph_per_s",
        "f0" => "degeneracy.f0",
        "f1" => "degeneracy.f1",
        "probe_duration" => "probe.tau_p_s",
        "n_measurements" => "run.n_measurements",
        _ => "config",
    }
}

impl Config {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))?;
        let omega = angular(
            raw.drive.omega_rad_per_s,
            raw.drive.omega_hz,
            "drive.omega_rad_per_s",
            "drive.omega_hz",
        )?
        .ok_or_else(|| CliError::input("drive.omega_rad_per_s (or drive.omega_hz) is required"))?;
        let delta = angular(
            raw.drive.detuning_rad_per_s,
            raw.drive.detuning_hz,
            "drive.detuning_rad_per_s",
            "drive.detuning_hz",
        )?
        .unwrap_or(0.0);
        let model = match raw.run.model.as_deref() {
            None => Model::Zeno,
            Some(s) => s.parse().map_err(|_| {
                CliError::input(format!(
                    "run.model: expected \"zeno\" or \"coherent\", got {s:?}"
                ))
            })?,
        };
        let experiment = ExperimentConfig {
            drive: DriveParams {
                omega,
                delta,
                tau: raw.drive.tau_s.unwrap_or(DEFAULT_TAU_S),
            },
            relax: RelaxationParams {
                big_gamma: raw.relax.big_gamma_per_s.unwrap_or(0.0),
                gamma_ph: raw.relax.gamma_ph_per_s.unwrap_or(0.0),
            },
            degeneracy: DegeneracyFactors {
                f0: raw.degeneracy.f0.unwrap_or(DEFAULT_F0),
                f1: raw.degeneracy.f1.unwrap_or(DEFAULT_F1),
            },
            probe_duration: raw.probe.tau_p_s.unwrap_or(DEFAULT_TAU_P_S),
            n_measurements: raw.run.n_measurements.unwrap_or(DEFAULT_N_MEASUREMENTS),
        };
        let config = Config {
            experiment,
            seed: raw.run.seed.unwrap_or(0),
            model,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks value ranges, naming the offending key.
    pub fn validate(&self) -> CliResult<()> {
        let ex = &self.experiment;
        if ex.probe_duration <= 0.0 {
            return Err(CliError::input(format!(
                "probe.tau_p_s: must be > 0, got {}",
                ex.probe_duration
            )));
        }
        ex.validate().map_err(|e| match e {
            zeno_core::Error::InvalidParameter { name, reason } => {
                CliError::input(format!("{}: {reason}", key_for(name)))
            }
            other => CliError::from(other),
        })
    }

    /// Hex SHA-256 over the physics-relevant values. Run settings (record
    /// length, seed, model) do not enter.
    pub fn hash(&self) -> String {
        let ex = &self.experiment;
        let fields = [
            ("omega", ex.drive.omega),
            ("delta", ex.drive.delta),
            ("tau", ex.drive.tau),
            ("big_gamma", ex.relax.big_gamma),
            ("gamma_ph", ex.relax.gamma_ph),
            ("f0", ex.degeneracy.f0),
            ("f1", ex.degeneracy.f1),
            ("tau_p", ex.probe_duration),
        ];
        let mut hasher = Sha256::new();
        hasher.update(b"zeno-config/v1");
        for (name, value) in fields {
            // +0.0 and −0.0 describe the same physics
            let value = if value == 0.0 { 0.0 } else { value };
            hasher.update(name.as_bytes());
            hasher.update(value.to_bits().to_le_bytes());
        }
        format!("{:x}", hasher.finalize())
    }
}
