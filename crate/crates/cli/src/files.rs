//! On-disk formats: trajectory records, statistics documents, and atomic
//! output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use zeno_core::stats::RunLengthHistogram;
use zeno_core::trajectory::Model;
use zeno_core::Outcome;

use crate::error::{CliError, CliResult};

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename, so readers never see a partial file. `None` or
/// `-` writes to standard output.
pub fn write_output(path: Option<&Path>, contents: &str) -> CliResult<()> {
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| CliError::Io { path, source }
    };
    match path {
        None => write_stdout(contents),
        Some(p) if p == Path::new("-") => write_stdout(contents),
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(p))?;
            tmp.write_all(contents.as_bytes()).map_err(io_err(p))?;
            tmp.as_file().sync_all().map_err(io_err(p))?;
            tmp.persist(p).map_err(|e| CliError::Io {
                path: p.to_owned(),
                source: e.error,
            })?;
            Ok(())
        }
    }
}

fn write_stdout(contents: &str) -> CliResult<()> {
    std::io::stdout()
        .write_all(contents.as_bytes())
        .map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        })
}

pub fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// A probe record with its provenance header.
///
/// ```text
/// # config_hash: 3f…
/// # seed: 42
/// # model: zeno
/// # generator: chacha8-u64-stream/v1
/// 0,on
/// 1,off
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    /// Header lines without the leading `#` and single following space, in
    /// file order.
    header: Vec<String>,
    pub outcomes: Vec<Outcome>,
}

impl TrajectoryFile {
    pub fn new(
        config_hash: &str,
        seed: u64,
        model: Model,
        generator: &str,
        outcomes: Vec<Outcome>,
    ) -> Self {
        Self {
            header: vec![
                format!("config_hash: {config_hash}"),
                format!("seed: {seed}"),
                format!("model: {model}"),
                format!("generator: {generator}"),
            ],
            outcomes,
        }
    }

    /// Value of a `key: value` header line.
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find_map(|line| {
            let (k, v) = line.split_once(':')?;
            (k.trim() == key).then(|| v.trim())
        })
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.header_value("config_hash")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.outcomes.len() * 8 + 256);
        for line in &self.header {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {line}");
            }
        }
        for (i, o) in self.outcomes.iter().enumerate() {
            let _ = writeln!(out, "{i},{o}");
        }
        out
    }

    /// Parses the canonical form written by [`TrajectoryFile::to_text`]; any
    /// accepted input serializes back to the same bytes.
    pub fn parse(text: &str) -> CliResult<Self> {
        let err = |line: usize, msg: &str| CliError::input(format!("line {line}: {msg}"));
        if !text.is_ascii() {
            return Err(CliError::input("trajectory file must be ASCII"));
        }
        if !text.is_empty() && !text.ends_with('\n') {
            let last = text.lines().count();
            return Err(err(last, "missing final newline"));
        }
        let mut header = Vec::new();
        let mut outcomes = Vec::new();
        for (i, line) in text.split_terminator('\n').enumerate() {
            let number = i + 1;
            if line.ends_with('\r') {
                return Err(err(number, "carriage return in line ending"));
            }
            if let Some(rest) = line.strip_prefix('#') {
                if !outcomes.is_empty() {
                    return Err(err(number, "header line after the first record"));
                }
                match rest.strip_prefix(' ') {
                    Some(content) if !content.is_empty() => header.push(content.to_string()),
                    _ if rest.is_empty() => header.push(String::new()),
                    _ => return Err(err(number, "header must be '# text'")),
                }
                continue;
            }
            let (index, token) = line
                .split_once(',')
                .ok_or_else(|| err(number, "expected 'index,outcome'"))?;
            let expected = outcomes.len();
            if index != expected.to_string() {
                return Err(err(
                    number,
                    &format!("index {index:?} out of sequence, expected {expected}"),
                ));
            }
            let outcome = match token {
                "on" => Outcome::On,
                "off" => Outcome::Off,
                _ => {
                    return Err(err(
                        number,
                        &format!("outcome must be \"on\" or \"off\", got {token:?}"),
                    ))
                }
            };
            outcomes.push(outcome);
        }
        if outcomes.is_empty() {
            return Err(CliError::input("trajectory file contains no records"));
        }
        Ok(Self { header, outcomes })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read_input(path)?).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Run lengths of one outcome as parallel columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTable {
    pub q: Vec<usize>,
    pub count: Vec<u64>,
    /// U(q)/U(1), runs of exactly length q.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ratio: Vec<f64>,
    /// Fraction of runs lasting at least q.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ratio_at_least: Vec<f64>,
}

impl RunTable {
    pub fn from_histogram(hist: &RunLengthHistogram, outcome: Outcome) -> Self {
        let counts = hist.counts(outcome);
        let unit = counts.get(&1).copied().unwrap_or(0);
        let total = hist.at_least(outcome, 1);
        let ratio = if unit > 0 {
            counts.values().map(|&c| c as f64 / unit as f64).collect()
        } else {
            Vec::new()
        };
        let ratio_at_least = if total > 0 {
            counts
                .keys()
                .map(|&q| hist.at_least(outcome, q) as f64 / total as f64)
                .collect()
        } else {
            Vec::new()
        };
        Self {
            q: counts.keys().copied().collect(),
            count: counts.values().copied().collect(),
            ratio,
            ratio_at_least,
        }
    }

    fn counts(&self, side: &str) -> CliResult<BTreeMap<usize, u64>> {
        if self.q.len() != self.count.len() {
            return Err(CliError::input(format!(
                "runs.{side}: q and count have different lengths"
            )));
        }
        let mut map = BTreeMap::new();
        for (&q, &c) in self.q.iter().zip(&self.count) {
            if q == 0 || map.insert(q, c).is_some() {
                return Err(CliError::input(format!(
                    "runs.{side}: run lengths must be distinct and ≥ 1"
                )));
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Runs {
    pub on: RunTable,
    pub off: RunTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P01Section {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub on_events: u64,
    pub transitions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePair {
    /// Model U(q)/U(1) for q = 1, 2, …
    pub on: Vec<f64>,
    pub off: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compare {
    pub config_hash: String,
    pub zeno_p0: f64,
    pub zeno_p1: f64,
    pub omega_tau: f64,
    pub log_likelihood_zeno: f64,
    pub log_likelihood_coherent: f64,
    pub log_ratio: f64,
    pub runs: u64,
    pub verdict: Model,
    pub zeno: CurvePair,
    pub coherent: CurvePair,
}

/// Summary statistics of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub n: u64,
    pub p01: P01Section,
    pub runs: Runs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<Compare>,
}

impl StatsFile {
    pub fn to_text(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::input(format!("serializing statistics: {e}")))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let stats: Self =
            toml::from_str(text).map_err(|e| CliError::input(format!("statistics file: {e}")))?;
        stats.histogram()?;
        Ok(stats)
    }

    /// The run-count histogram, checked against the record length.
    pub fn histogram(&self) -> CliResult<RunLengthHistogram> {
        let hist = RunLengthHistogram {
            n_measurements: self.n,
            counts_on: self.runs.on.counts("on")?,
            counts_off: self.runs.off.counts("off")?,
        };
        if hist.weighted_total() != self.n {
            return Err(CliError::input(format!(
                "statistics file: Σ q·count = {} does not match n = {}",
                hist.weighted_total(),
                self.n
            )));
        }
        Ok(hist)
    }
}

/// Externally supplied ratios for `fit runs`, e.g.
///
/// ```toml
/// n = 500
/// [on]
/// q = [1, 2, 3]
/// ratio = [1.0, 0.59, 0.35]
/// weight = [300, 170, 100]   # optional, default 1
/// [off]
/// q = [1, 2, 3]
/// ratio = [1.0, 0.15, 0.02]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioFile {
    pub n: Option<usize>,
    #[serde(default)]
    pub on: RatioTable,
    #[serde(default)]
    pub off: RatioTable,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioTable {
    pub q: Vec<usize>,
    pub ratio: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight: Vec<f64>,
}

impl RatioTable {
    pub fn entries(&self, side: &str) -> CliResult<BTreeMap<usize, (f64, f64)>> {
        let weights_given = !self.weight.is_empty();
        if self.q.len() != self.ratio.len() || (weights_given && self.weight.len() != self.q.len())
        {
            return Err(CliError::input(format!(
                "{side}: q, ratio and weight must have equal lengths"
            )));
        }
        let mut map = BTreeMap::new();
        for (i, (&q, &r)) in self.q.iter().zip(&self.ratio).enumerate() {
            let w = if weights_given { self.weight[i] } else { 1.0 };
            if q == 0 || map.insert(q, (r, w)).is_some() {
                return Err(CliError::input(format!(
                    "{side}: run lengths must be distinct and ≥ 1"
                )));
            }
        }
        Ok(map)
    }
}
