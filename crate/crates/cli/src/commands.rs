//! Implementations of the subcommands. Each returns the text it produced so
//! that `main` only deals with output placement and exit codes.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use zeno_core::bloch::{
    excitation_probability_coherent, ode_transition_probability, survival_probability, BlochRates,
    DegeneracyFactors, DerivedBlochParams, OdeOptions, RelaxationParams,
};
use zeno_core::fitting::{
    fit_contrast, fit_run_lengths, FitMode, FitOptions, FitResult, RunLengthData, RunLengthModel,
};
use zeno_core::spectrum::{scan_point, McOptions, ScanAxis};
use zeno_core::stats::{
    discriminate_by_outcome, estimate_p01_detailed, model_curve, CurveParameter, ModelCurve,
    RunLengthHistogram,
};
use zeno_core::trajectory::{simulate, Model, GENERATOR_NAME};
use zeno_core::Outcome;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::files::{
    read_input, Compare, CurvePair, P01Section, RatioFile, RatioTable, RunTable, Runs, StatsFile,
    TrajectoryFile,
};
use crate::parallel::map_indexed;

pub struct SimulateArgs {
    pub seed: Option<u64>,
    pub model: Option<Model>,
    pub n_measurements: Option<usize>,
}

pub fn simulate_cmd(config: &Config, args: &SimulateArgs) -> CliResult<String> {
    let mut experiment = config.experiment;
    if let Some(n) = args.n_measurements {
        experiment.n_measurements = n;
    }
    let config = Config {
        experiment,
        seed: args.seed.unwrap_or(config.seed),
        model: args.model.unwrap_or(config.model),
    };
    config.validate()?;
    let traj = simulate(&config.experiment, config.model, config.seed)?;
    let file = TrajectoryFile::new(
        &config.hash(),
        config.seed,
        config.model,
        GENERATOR_NAME,
        traj.into_outcomes(),
    );
    Ok(file.to_text())
}

fn curve_values(curve: &ModelCurve) -> Vec<f64> {
    curve.values.values().copied().collect()
}

fn compare(hist: &RunLengthHistogram, config: &Config) -> CliResult<Compare> {
    let (p0, p1) = config.experiment.stay_probabilities()?;
    let omega_tau = config.experiment.drive.pulse_area();
    let n = hist.n_measurements as usize;
    let q_max = (hist.max_run() + 1).min(n);
    let zeno_on = model_curve(CurveParameter::Zeno { p: p0 }, Some(n), q_max)?;
    let zeno_off = model_curve(CurveParameter::Zeno { p: p1 }, Some(n), q_max)?;
    let coherent = model_curve(CurveParameter::Coherent { omega_tau }, Some(n), q_max)?;
    let d = discriminate_by_outcome(hist, [&zeno_on, &zeno_off], [&coherent, &coherent])?;
    Ok(Compare {
        config_hash: config.hash(),
        zeno_p0: p0,
        zeno_p1: p1,
        omega_tau,
        log_likelihood_zeno: d.log_likelihood_zeno,
        log_likelihood_coherent: d.log_likelihood_coherent,
        log_ratio: d.log_ratio,
        runs: d.runs,
        verdict: d.preferred,
        zeno: CurvePair {
            on: curve_values(&zeno_on),
            off: curve_values(&zeno_off),
        },
        coherent: CurvePair {
            on: curve_values(&coherent),
            off: curve_values(&coherent),
        },
    })
}

pub fn analyze_cmd(traj: &TrajectoryFile, compare_with: Option<&Config>) -> CliResult<String> {
    let hist = RunLengthHistogram::from_outcomes(&traj.outcomes);
    let p01 = match estimate_p01_detailed(&traj.outcomes) {
        Ok(est) => P01Section {
            estimate: Some(est.value),
            std_error: Some(est.std_error),
            on_events: est.on_events,
            transitions: est.transitions,
        },
        // a record without "on" events still has well-defined run statistics
        Err(zeno_core::Error::NoOnEvents) => P01Section {
            estimate: None,
            std_error: None,
            on_events: 0,
            transitions: 0,
        },
        Err(e) => return Err(e.into()),
    };
    let compare = match compare_with {
        None => None,
        Some(config) => {
            let expected = config.hash();
            match traj.config_hash() {
                Some(h) if h == expected => {}
                Some(h) => {
                    return Err(CliError::input(format!(
                        "trajectory header config_hash {h} does not match the supplied config ({expected})"
                    )))
                }
                None => {
                    return Err(CliError::input(
                        "trajectory header has no config_hash; cannot compare against a config",
                    ))
                }
            }
            Some(compare(&hist, config)?)
        }
    };
    StatsFile {
        n: hist.n_measurements,
        p01,
        runs: Runs {
            on: RunTable::from_histogram(&hist, Outcome::On),
            off: RunTable::from_histogram(&hist, Outcome::Off),
        },
        compare,
    }
    .to_text()
}

pub struct SpectrumArgs {
    pub axis: ScanAxis,
    pub start: Option<f64>,
    pub step: f64,
    pub count: usize,
    pub monte_carlo: bool,
}

pub fn spectrum_cmd(config: &Config, args: &SpectrumArgs) -> CliResult<String> {
    if args.step == 0.0 || !args.step.is_finite() {
        return Err(CliError::input("--step must be finite and nonzero"));
    }
    if args.count == 0 {
        return Err(CliError::input("--count must be ≥ 1"));
    }
    let mut base = config.experiment.drive;
    match (args.axis, args.start) {
        (ScanAxis::Detuning, Some(s)) => base.delta = s,
        (ScanAxis::PulseLength, Some(s)) => base.tau = s,
        (_, None) => {}
    }
    let mc = args.monte_carlo.then_some(McOptions {
        n_measurements: config.experiment.n_measurements,
        seed: config.seed,
    });
    let points = map_indexed(args.count, |k| {
        scan_point(&base, args.axis, args.step, k, mc)
    });
    let mut out = String::new();
    out.push_str(match args.axis {
        ScanAxis::Detuning => "detuning_rad_per_s,p01_model,p01_mc,stderr\n",
        ScanAxis::PulseLength => "tau_s,p01_model,p01_mc,stderr\n",
    });
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for point in points {
        let point = point?;
        let x = match args.axis {
            ScanAxis::Detuning => point.detuning,
            ScanAxis::PulseLength => point.tau,
        };
        let _ = writeln!(
            out,
            "{x},{},{},{}",
            point.p01_model,
            opt(point.p01_mc),
            opt(point.std_error)
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct ContrastInputs {
    p_max: f64,
    p_min: f64,
    f0: f64,
}

#[derive(Serialize)]
struct ContrastOutput {
    inputs: ContrastInputs,
    result: ContrastResult,
}

#[derive(Serialize)]
struct ContrastResult {
    b0: f64,
    a_plus_b: f64,
}

fn to_toml<T: Serialize>(value: &T) -> CliResult<String> {
    toml::to_string(value).map_err(|e| CliError::input(format!("serializing output: {e}")))
}

pub fn fit_contrast_cmd(p_max: f64, p_min: f64, f0: f64) -> CliResult<String> {
    let fit = fit_contrast(p_max, p_min, f0)?;
    to_toml(&ContrastOutput {
        inputs: ContrastInputs { p_max, p_min, f0 },
        result: ContrastResult {
            b0: fit.b0,
            a_plus_b: fit.a_plus_b,
        },
    })
}

pub struct FitRunsArgs {
    pub model: RunLengthModel,
    pub n_measurements: Option<usize>,
    pub mode: FitMode,
}

#[derive(Serialize)]
struct FitRunsInputs {
    a_plus_b: f64,
    a_minus_b: f64,
    b0: f64,
    f0: f64,
    revolutions: u64,
    n: usize,
    mode: FitMode,
    on: RatioTable,
    off: RatioTable,
}

#[derive(Serialize)]
struct FitRunsResult {
    residual: f64,
    iterations: usize,
    converged: bool,
    parameters: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct FitRunsOutput {
    inputs: FitRunsInputs,
    result: FitRunsResult,
}

fn ratio_table(side: &BTreeMap<usize, (f64, f64)>) -> RatioTable {
    RatioTable {
        q: side.keys().copied().collect(),
        ratio: side.values().map(|v| v.0).collect(),
        weight: side.values().map(|v| v.1).collect(),
    }
}

/// Reads either a statistics file (run counts) or a ratio file.
fn load_fit_data(path: &Path) -> CliResult<(RunLengthData, Option<usize>)> {
    let text = read_input(path)?;
    let value: toml::Table = text
        .parse()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let located = |e: CliError| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    };
    if value.contains_key("runs") {
        let stats = StatsFile::parse(&text).map_err(located)?;
        let hist = stats.histogram().map_err(located)?;
        Ok((RunLengthData::from_histogram(&hist), Some(stats.n as usize)))
    } else {
        let ratios: RatioFile = toml::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let data = RunLengthData {
            on: ratios.on.entries("on").map_err(located)?,
            off: ratios.off.entries("off").map_err(located)?,
        };
        Ok((data, ratios.n))
    }
}

pub fn fit_runs_cmd(input: &Path, args: &FitRunsArgs) -> CliResult<String> {
    let (data, file_n) = load_fit_data(input)?;
    let n = args.n_measurements.or(file_n).ok_or_else(|| {
        CliError::input("record length unknown: pass --n or set n in the input file")
    })?;
    let opts = FitOptions {
        mode: args.mode,
        ..FitOptions::default()
    };
    let fit: FitResult = fit_run_lengths(&data, &args.model, n, &opts)?;
    let m = &args.model;
    to_toml(&FitRunsOutput {
        inputs: FitRunsInputs {
            a_plus_b: m.a_plus_b,
            a_minus_b: m.a_minus_b,
            b0: m.b0,
            f0: m.f0,
            revolutions: m.revolutions,
            n,
            mode: args.mode,
            on: ratio_table(&data.on),
            off: ratio_table(&data.off),
        },
        result: FitRunsResult {
            residual: fit.residual,
            iterations: fit.iterations,
            converged: fit.converged,
            parameters: fit.parameters,
        },
    })
}

struct Check {
    name: &'static str,
    deviation: f64,
    tolerance: f64,
    note: String,
}

const ODE_TOLERANCE: f64 = 1e-6;
const REDUCTION_TOLERANCE: f64 = 1e-12;

/// Largest |analytic − ODE| over the standard (Ωτ, a, b) grid, both starts.
fn oracle_grid() -> CliResult<f64> {
    let mut cells = Vec::new();
    for omega_tau in [2.0, 5.0, 10.0, 50.0, 200.0] {
        for i in 0..=10 {
            for j in 0..=10 {
                cells.push((omega_tau, 0.1 * i as f64, 0.1 * j as f64));
            }
        }
    }
    let results = map_indexed(cells.len(), |k| -> CliResult<f64> {
        let (omega_tau, a, b) = cells[k];
        let Ok(params) = DerivedBlochParams::from_dimensionless(omega_tau, a, b) else {
            return Ok(0.0); // outside the underdamped regime of the closed form
        };
        let rates = BlochRates::from_dimensionless(omega_tau, a, b);
        let mut worst: f64 = 0.0;
        for start in [Outcome::On, Outcome::Off] {
            let analytic = params.survival(start, 1.0)?;
            let ode = ode_transition_probability(start, &rates, 1.0, OdeOptions::default())?;
            worst = worst.max((analytic - ode).abs());
        }
        Ok(worst)
    });
    results
        .into_iter()
        .try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

/// Runs the analytic-vs-ODE and zero-relaxation reduction checks for a
/// configuration. Returns the report and whether every check passed.
pub fn validate_cmd(config: &Config) -> CliResult<(String, bool)> {
    let ex = &config.experiment;
    let drive = ex.drive;
    let mut checks = Vec::new();

    // closed form at the configured point against direct integration
    let rates = BlochRates::new(&drive, &ex.relax);
    if drive.delta == 0.0 {
        let params = zeno_core::bloch::derive_bloch_params(&drive, &ex.relax)?;
        let mut worst: f64 = 0.0;
        for start in [Outcome::On, Outcome::Off] {
            let analytic = params.survival(start, 1.0)?;
            let ode = ode_transition_probability(start, &rates, drive.tau, OdeOptions::default())?;
            worst = worst.max((analytic - ode).abs());
        }
        checks.push(Check {
            name: "damped nutation vs ODE at config",
            deviation: worst,
            tolerance: ODE_TOLERANCE,
            note: format!("Ωτ = {:.6}", drive.pulse_area()),
        });
    } else {
        // the damped closed form is resonance-only; check the coherent
        // detuned formula instead
        let coherent = BlochRates::new(&drive, &RelaxationParams::none());
        let ode = 1.0
            - ode_transition_probability(Outcome::On, &coherent, drive.tau, OdeOptions::default())?;
        checks.push(Check {
            name: "detuned coherent vs ODE at config",
            deviation: (excitation_probability_coherent(&drive) - ode).abs(),
            tolerance: ODE_TOLERANCE,
            note: format!("Δ = {} rad/s, relaxation dropped", drive.delta),
        });
    }

    // damped form with zero relaxation against the coherent formula
    let area = drive.pulse_area().max(TAU);
    let mut worst: f64 = 0.0;
    for k in 1..=1000 {
        let probe = drive.with_delta(0.0);
        let probe = zeno_core::bloch::DriveParams {
            omega: area * k as f64 / 1000.0 / probe.tau,
            ..probe
        };
        let p0 = survival_probability(
            Outcome::On,
            &probe,
            &RelaxationParams::none(),
            &DegeneracyFactors::unity(),
        )?;
        worst = worst.max(((1.0 - p0) - excitation_probability_coherent(&probe)).abs());
    }
    checks.push(Check {
        name: "zero-relaxation reduction",
        deviation: worst,
        tolerance: REDUCTION_TOLERANCE,
        note: format!("1000 pulse areas in (0, {area:.6}]"),
    });

    checks.push(Check {
        name: "oracle grid",
        deviation: oracle_grid()?,
        tolerance: ODE_TOLERANCE,
        note: "Ωτ ∈ {2,5,10,50,200}, a,b ∈ {0,…,1}".into(),
    });

    let mut report = String::new();
    let mut all_pass = true;
    for c in &checks {
        let pass = c.deviation < c.tolerance;
        all_pass &= pass;
        let _ = writeln!(
            report,
            "{} {}: max deviation {:.3e} (tolerance {:.0e}; {})",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            c.deviation,
            c.tolerance,
            c.note
        );
    }
    Ok((report, all_pass))
}
