//! `zeno`: simulate, analyze and fit single-ion quantum Zeno experiments.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error, 3 physics
//! domain error.

mod commands;
mod config;
mod error;
mod files;
mod parallel;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zeno_core::fitting::{FitMode, RunLengthModel};
use zeno_core::spectrum::ScanAxis;
use zeno_core::trajectory::Model;

use crate::commands::{FitRunsArgs, SimulateArgs, SpectrumArgs};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::files::{write_output, TrajectoryFile};

#[derive(Parser)]
#[command(
    name = "zeno",
    version,
    about = "Single-ion quantum Zeno experiment simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Zeno,
    Coherent,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Zeno => Model::Zeno,
            ModelArg::Coherent => Model::Coherent,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Detuning,
    PulseLength,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Joint,
    TwoStage,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a measurement record from a configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides run.model.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Overrides run.n_measurements.
        #[arg(long)]
        n: Option<usize>,
        /// Output path; standard output if omitted or "-".
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate p₀₁ and run-length statistics of a record.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add both model curves and the likelihood verdict, using the
        /// configuration the record was generated from.
        #[arg(long, requires = "config")]
        compare: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Stroboscopic excitation spectrum as CSV.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        /// Stepped quantity.
        #[arg(long, value_enum, default_value = "detuning")]
        axis: AxisArg,
        /// First detuning (rad/s) or pulse length (s); defaults to the config value.
        #[arg(long, allow_negative_numbers = true)]
        start: Option<f64>,
        /// Increment per point in rad/s or s; must be nonzero.
        #[arg(long, allow_negative_numbers = true)]
        step: f64,
        #[arg(long)]
        count: usize,
        /// Attach a simulated estimate (run.n_measurements per point, seeds run.seed + k).
        #[arg(long)]
        mc: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover model parameters.
    Fit {
        #[command(subcommand)]
        kind: FitCommand,
    },
    /// Check the closed forms against numerical integration.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum FitCommand {
    /// (B₀, a+b) from the extremes of p₀₁.
    Contrast {
        #[arg(long)]
        p_max: f64,
        #[arg(long)]
        p_min: f64,
        #[arg(long, default_value_t = config::DEFAULT_F0)]
        f0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// (θ′, f₁) from run-length statistics or a ratio file.
    Runs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        a_plus_b: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        a_minus_b: f64,
        #[arg(long)]
        b0: f64,
        #[arg(long, default_value_t = config::DEFAULT_F0)]
        f0: f64,
        /// Whole revolutions n of the nutation angle, θ = 2πn + θ′.
        #[arg(long)]
        revolutions: u64,
        /// Record length; required if the input does not state it.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value = "joint")]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            model,
            n,
            out,
        } => {
            let config = Config::load(&config)?;
            let args = SimulateArgs {
                seed,
                model: model.map(Model::from),
                n_measurements: n,
            };
            write_output(out.as_deref(), &commands::simulate_cmd(&config, &args)?)
        }
        Command::Analyze {
            input,
            out,
            compare,
            config,
        } => {
            let traj = TrajectoryFile::load(&input)?;
            let config = match (compare, config) {
                (true, Some(path)) => Some(Config::load(&path)?),
                _ => None,
            };
            write_output(
                out.as_deref(),
                &commands::analyze_cmd(&traj, config.as_ref())?,
            )
        }
        Command::Spectrum {
            config,
            axis,
            start,
            step,
            count,
            mc,
            out,
        } => {
            let config = Config::load(&config)?;
            let args = SpectrumArgs {
                axis: match axis {
                    AxisArg::Detuning => ScanAxis::Detuning,
                    AxisArg::PulseLength => ScanAxis::PulseLength,
                },
                start,
                step,
                count,
                monte_carlo: mc,
            };
            write_output(out.as_deref(), &commands::spectrum_cmd(&config, &args)?)
        }
        Command::Fit { kind } => match kind {
            FitCommand::Contrast {
                p_max,
                p_min,
                f0,
                out,
            } => write_output(
                out.as_deref(),
                &commands::fit_contrast_cmd(p_max, p_min, f0)?,
            ),
            FitCommand::Runs {
                input,
                a_plus_b,
                a_minus_b,
                b0,
                f0,
                revolutions,
                n,
                mode,
                out,
            } => {
                let args = FitRunsArgs {
                    model: RunLengthModel {
                        a_plus_b,
                        a_minus_b,
                        b0,
                        f0,
                        revolutions,
                    },
                    n_measurements: n,
                    mode: match mode {
                        ModeArg::Joint => FitMode::Joint,
                        ModeArg::TwoStage => FitMode::TwoStage,
                    },
                };
                write_output(out.as_deref(), &commands::fit_runs_cmd(&input, &args)?)
            }
        },
        Command::Validate { config } => {
            let config = Config::load(&config)?;
            let (report, pass) = commands::validate_cmd(&config)?;
            print!("{report}");
            if pass {
                Ok(())
            } else {
                Err(CliError::Validation(
                    "one or more checks exceeded tolerance".into(),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
