//! Simulation and analysis of single-ion quantum Zeno experiments.
//!
//! A two-level ion is driven for a pulse of length τ and then probed; the
//! probe projects it onto the ground state ("on", fluorescence seen) or the
//! metastable state ("off"). The crate provides
//!
//! * [`bloch`]: closed-form damped nutation and an ODE cross-check,
//! * [`trajectory`]: seeded on/off records under projection or under
//!   uninterrupted coherent evolution,
//! * [`stats`]: p₀₁ estimation, run-length histograms, model curves and
//!   likelihood-based model discrimination,
//! * [`spectrum`]: stroboscopic detuning scans and nutation-angle calibration,
//! * [`fitting`]: recovery of (B₀, a+b) and (θ′, f₁) from measured statistics.

pub mod bloch;
pub mod error;
pub mod fitting;
pub mod outcome;
pub mod spectrum;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
pub use outcome::Outcome;
