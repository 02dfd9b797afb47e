//! Monte Carlo experiment harness: configuration, parallel trials,
//! statistical summaries, and deterministic CSV/JSON rendering.
//!
//! Determinism contract: the tuple (config, base seed) fully determines the
//! trial outcomes. Each trial's generator seed is `mix(base_seed, trial
//! index)`, so extending `trials` never perturbs earlier trials, and trials
//! are merged in index order after parallel execution, so thread count and
//! scheduling cannot change any output. The CSV and summary JSON are
//! byte-identical across re-runs; per-trial trace lines additionally carry a
//! wall-clock measurement, which is the one field outside the contract.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{run_uniform, UniformError};
use crate::instance::{BanditInstance, InstanceClass, InstanceError};
use crate::rng::{mix, RngStream};
use crate::search::{run_bracketed, SearchError, SearchParams, DEFAULT_MULTIPLIER, DEFAULT_SAFETY_CAP};

/// 97.5% normal quantile: half-width factor of the fixed 95% Wilson interval.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Which identification strategy an experiment exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// The bracketed phased search (this library's main algorithm).
    #[serde(rename = "bracketed", alias = "pseeb")]
    Bracketed,
    /// The uniform round-robin comparator.
    #[serde(rename = "uniform-lil")]
    UniformLil,
}

impl Algorithm {
    /// Canonical name used in all outputs (aliases never round-trip back).
    #[must_use]
    pub fn canonical_name(self) -> &'static str {
        match self {
            Algorithm::Bracketed => "bracketed",
            Algorithm::UniformLil => "uniform-lil",
        }
    }
}

/// Instance referenced by a config: inline table or path to an instance file
/// (relative paths resolve against the config file's directory).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    /// Path to a TOML instance file.
    Path(PathBuf),
    /// Instance written directly inside the config.
    Inline(BanditInstance),
}

impl InstanceSpec {
    /// Loads the instance, returning it with any validation warnings.
    pub fn resolve(&self, base_dir: &Path) -> Result<(BanditInstance, Vec<String>), InstanceError> {
        match self {
            InstanceSpec::Path(path) => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                BanditInstance::from_path(&full)
            }
            InstanceSpec::Inline(instance) => Ok((instance.clone(), instance.warnings())),
        }
    }
}

fn default_multiplier() -> f64 {
    DEFAULT_MULTIPLIER
}

fn default_safety_cap() -> u64 {
    DEFAULT_SAFETY_CAP
}

/// A complete experiment description; round-trips losslessly through TOML.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// The problem instance (inline or a path to an instance file).
    pub instance: InstanceSpec,
    /// Strategy to run.
    pub algorithm: Algorithm,
    /// Tolerances to sweep; one summary row per value.
    pub deltas: Vec<f64>,
    /// Exploration widening factor (strictly above 1; unused by the uniform
    /// comparator).
    #[serde(default = "default_multiplier", alias = "c")]
    pub multiplier: f64,
    /// Independent trials per tolerance.
    pub trials: u64,
    /// Base seed; trial `i` runs from `mix(base_seed, i)`.
    #[serde(default)]
    pub base_seed: u64,
    /// Per-trial ceiling on total draws.
    #[serde(default = "default_safety_cap")]
    pub safety_cap: u64,
    /// Where the CSV lands (the JSON summary and optional traces derive
    /// their paths from it); optional here because the CLI may supply it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Also write one JSON line per trial next to the CSV.
    #[serde(default)]
    pub emit_traces: bool,
}

/// Errors raised by config validation or experiment execution.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("boundary instance: an arm mean equals the threshold exactly")]
    BoundaryInstance,
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentConfig {
    /// Parses a config from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads and parses a config file.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Renders the config back to TOML.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field invariant (instance validity is checked separately
    /// at resolution time).
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.deltas.is_empty() {
            return Err(HarnessError::Config("deltas must not be empty".into()));
        }
        for &delta in &self.deltas {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(HarnessError::Config(format!(
                    "delta values must lie strictly inside (0, 1), got {delta}"
                )));
            }
        }
        if self.multiplier.is_nan() || self.multiplier <= 1.0 {
            return Err(HarnessError::Config(format!(
                "multiplier must be strictly above 1, got {}",
                self.multiplier
            )));
        }
        if self.safety_cap == 0 {
            return Err(HarnessError::Config("safety_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// What stopped a trial before it produced a verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anomaly {
    /// The safety cap halted the run.
    Truncated,
    /// The engine ran out of phase schedule (propagated engine failure).
    ScheduleOverflow,
}

/// One trial's full outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 0-based trial index within its tolerance block.
    pub trial: u64,
    /// Derived generator seed (`mix(base_seed, trial)`).
    pub seed: u64,
    /// Tolerance this trial ran at.
    pub delta: f64,
    /// `Some(arm)` or the no-qualified-arm verdict; `None` is also reported
    /// for anomalous trials (check [`Self::anomaly`]).
    pub answer: Option<usize>,
    /// Whether the answer is correct against the ground truth: a returned
    /// arm must truly sit at or above the threshold, and the no-arm verdict
    /// is correct only on negative instances. Anomalous trials count as
    /// incorrect.
    pub correct: bool,
    /// Total draws spent (0 for trials that failed without an outcome).
    pub tau: u64,
    /// Draws per bracket copy (bracketed) or per arm (uniform comparator).
    pub per_copy_draws: Vec<u64>,
    /// Present when the trial ended without a verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<Anomaly>,
    /// Wall-clock duration of the trial in microseconds. The only field
    /// outside the byte-determinism contract.
    pub wall_time_micros: u64,
}

/// Aggregate statistics for one (algorithm, tolerance) block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Canonical algorithm name.
    pub algorithm: String,
    /// Tolerance.
    pub delta: f64,
    /// Trials run.
    pub trials: u64,
    /// Trials whose answer was wrong or missing (anomalies included).
    pub errors: u64,
    /// `errors / trials`.
    pub error_rate: f64,
    /// 95% Wilson interval for the error rate.
    pub error_wilson_lo: f64,
    /// Upper end of the same interval.
    pub error_wilson_hi: f64,
    /// Mean draws over trials that produced a verdict (0 if none did).
    pub mean_tau: f64,
    /// Standard error of that mean (sample standard deviation / sqrt(n)).
    pub se_tau: f64,
    /// Median draws over trials with a verdict.
    pub median_tau: f64,
    /// Largest draw count over trials with a verdict.
    pub max_tau: u64,
    /// Trials stopped by the safety cap or an engine failure.
    pub anomalies: u64,
}

/// Everything an experiment produces, before any file is written.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    /// One row per tolerance, in config order.
    pub rows: Vec<SummaryRow>,
    /// Trial records grouped per tolerance, aligned with [`Self::rows`].
    pub trial_blocks: Vec<Vec<TrialRecord>>,
    /// Warnings produced while resolving the instance.
    pub warnings: Vec<String>,
}

/// Two-sided 95% Wilson score interval for `successes` out of `trials`.
#[must_use]
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn run_single_trial(
    instance: &BanditInstance,
    algorithm: Algorithm,
    delta: f64,
    multiplier: f64,
    safety_cap: u64,
    base_seed: u64,
    trial: u64,
) -> TrialRecord {
    let seed = mix(base_seed, trial);
    let stream = RngStream::new(seed);
    let started = Instant::now();

    let (answer, tau, per_copy_draws, anomaly) = match algorithm {
        Algorithm::Bracketed => {
            let params = SearchParams::new(delta)
                .with_multiplier(multiplier)
                .with_safety_cap(safety_cap);
            match run_bracketed(instance, &params, stream) {
                Ok(outcome) => {
                    let anomaly = outcome.truncated.then_some(Anomaly::Truncated);
                    (outcome.answer, outcome.total_draws, outcome.per_copy_draws, anomaly)
                }
                Err(SearchError::ScheduleOverflow { .. }) => {
                    (None, 0, Vec::new(), Some(Anomaly::ScheduleOverflow))
                }
                Err(other) => unreachable!(
                    "instance and parameters are validated before trials start: {other}"
                ),
            }
        }
        Algorithm::UniformLil => match run_uniform(instance, delta, safety_cap, stream) {
            Ok(outcome) => {
                let anomaly = outcome.truncated.then_some(Anomaly::Truncated);
                (outcome.answer, outcome.total_draws, outcome.per_arm_draws, anomaly)
            }
            Err(other @ (UniformError::BoundaryInstance | UniformError::BadTolerance(_))) => {
                unreachable!("instance and parameters are validated before trials start: {other}")
            }
        },
    };

    let correct = anomaly.is_none() && instance.is_correct_answer(answer);
    TrialRecord {
        trial,
        seed,
        delta,
        answer,
        correct,
        tau,
        per_copy_draws,
        anomaly,
        wall_time_micros: started.elapsed().as_micros() as u64,
    }
}

/// Aggregates one block of records into its summary row.
#[must_use]
pub fn summarize(algorithm: Algorithm, delta: f64, records: &[TrialRecord]) -> SummaryRow {
    let trials = records.len() as u64;
    let errors = records.iter().filter(|r| !r.correct).count() as u64;
    let anomalies = records.iter().filter(|r| r.anomaly.is_some()).count() as u64;
    let (error_wilson_lo, error_wilson_hi) = wilson_interval(errors, trials);

    let mut taus: Vec<u64> =
        records.iter().filter(|r| r.anomaly.is_none()).map(|r| r.tau).collect();
    taus.sort_unstable();
    let n = taus.len();
    let (mean_tau, se_tau, median_tau, max_tau) = if n == 0 {
        (0.0, 0.0, 0.0, 0)
    } else {
        let mean = taus.iter().map(|&t| t as f64).sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var = taus.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>()
                / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        };
        let median = if n % 2 == 1 {
            taus[n / 2] as f64
        } else {
            (taus[n / 2 - 1] as f64 + taus[n / 2] as f64) / 2.0
        };
        (mean, se, median, taus[n - 1])
    };

    SummaryRow {
        algorithm: algorithm.canonical_name().to_string(),
        delta,
        trials,
        errors,
        error_rate: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
        error_wilson_lo,
        error_wilson_hi,
        mean_tau,
        se_tau,
        median_tau,
        max_tau,
        anomalies,
    }
}

/// Runs the whole experiment: every tolerance, `trials` trials each, in
/// parallel with index-ordered merging. `base_dir` anchors a relative
/// instance path (pass the config file's directory, or `.`).
pub fn run_experiment(
    config: &ExperimentConfig,
    base_dir: &Path,
) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let (instance, warnings) = config.instance.resolve(base_dir)?;
    if instance.classify() == InstanceClass::Boundary {
        return Err(HarnessError::BoundaryInstance);
    }
    if instance.arm_count() < 2 && config.algorithm == Algorithm::Bracketed {
        return Err(HarnessError::Config(
            "the bracketed algorithm needs at least 2 arms".into(),
        ));
    }

    let mut rows = Vec::with_capacity(config.deltas.len());
    let mut trial_blocks = Vec::with_capacity(config.deltas.len());
    for &delta in &config.deltas {
        let records: Vec<TrialRecord> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                run_single_trial(
                    &instance,
                    config.algorithm,
                    delta,
                    config.multiplier,
                    config.safety_cap,
                    config.base_seed,
                    trial,
                )
            })
            .collect();
        rows.push(summarize(config.algorithm, delta, &records));
        trial_blocks.push(records);
    }
    Ok(ExperimentReport { rows, trial_blocks, warnings })
}

/// Renders summary rows as CSV with the frozen column order:
/// `algorithm,delta,trials,errors,error_rate,error_wilson_lo,error_wilson_hi,mean_tau,se_tau,median_tau,max_tau,anomalies`.
#[must_use]
pub fn render_csv(rows: &[SummaryRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory CSV write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory CSV flush"))
        .expect("CSV is UTF-8")
}

/// Renders the summary JSON (pretty, trailing newline).
#[must_use]
pub fn render_summary_json(rows: &[SummaryRow]) -> String {
    let mut text = serde_json::to_string_pretty(rows).expect("rows serialize");
    text.push('\n');
    text
}

/// Renders per-trial records as newline-delimited JSON.
#[must_use]
pub fn render_traces(blocks: &[Vec<TrialRecord>]) -> String {
    let mut text = String::new();
    for block in blocks {
        for record in block {
            text.push_str(&serde_json::to_string(record).expect("record serializes"));
            text.push('\n');
        }
    }
    text
}

/// Output files an experiment wrote.
#[derive(Clone, Debug)]
pub struct WrittenOutputs {
    pub csv: PathBuf,
    pub summary_json: PathBuf,
    pub traces: Option<PathBuf>,
}

/// Writes the CSV, the JSON summary (same stem, `.json`), and — when
/// requested — the trace lines (same stem, `.trials.jsonl`).
pub fn write_outputs(
    report: &ExperimentReport,
    csv_path: &Path,
    emit_traces: bool,
) -> Result<WrittenOutputs, HarnessError> {
    let write = |path: &Path, text: String| -> Result<(), HarnessError> {
        std::fs::write(path, text)
            .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
    };
    write(csv_path, render_csv(&report.rows))?;
    let summary_json = csv_path.with_extension("json");
    write(&summary_json, render_summary_json(&report.rows))?;
    let traces = if emit_traces {
        let path = csv_path.with_extension("trials.jsonl");
        write(&path, render_traces(&report.trial_blocks))?;
        Some(path)
    } else {
        None
    };
    Ok(WrittenOutputs { csv: csv_path.to_path_buf(), summary_json, traces })
}

/// One row of the bracket-placement table: how often the best-`top` set
/// misses every bracket below `cutoff`, against the closed-form bound.
#[derive(Clone, Debug, Serialize)]
pub struct BracketStatRow {
    /// Bracket cutoff (1-based).
    pub cutoff: usize,
    /// Monte Carlo estimate of the exceedance probability.
    pub empirical: f64,
    /// Closed-form tail bound.
    pub bound: f64,
    /// Exact probability by enumeration (only for small arm counts).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

/// Builds the bracket-placement table for `arm_count` arms and the best
/// `top` set, from `samples` random shuffles.
pub fn bracket_stats(
    arm_count: usize,
    top: usize,
    samples: u64,
    stream: RngStream,
) -> Result<Vec<BracketStatRow>, crate::brackets::BracketError> {
    use crate::brackets::{
        bracket_count, exact_qualified_bracket_exceedance, qualified_bracket_tail_bound,
        BracketSet, MAX_ENUMERATION_ARMS,
    };

    let count = bracket_count(arm_count)?;
    // Validate `top` eagerly via a deterministic set.
    BracketSet::from_order((0..arm_count).collect())?.min_qualified_bracket(top)?;

    let mut exceed = vec![0u64; count + 1];
    let mut rng = stream.rng();
    for _ in 0..samples {
        let set = BracketSet::sample(arm_count, &mut rng)?;
        let hit = set.min_qualified_bracket(top)?;
        for count in exceed.iter_mut().take(hit + 1).skip(1) {
            *count += 1;
        }
    }
    let exact = if arm_count <= MAX_ENUMERATION_ARMS {
        Some(exact_qualified_bracket_exceedance(arm_count, top)?)
    } else {
        None
    };
    Ok((1..=count)
        .map(|number| BracketStatRow {
            cutoff: number,
            empirical: exceed[number] as f64 / samples.max(1) as f64,
            bound: qualified_bracket_tail_bound(top, number, arm_count),
            exact: exact.as_ref().map(|v| v[number - 1]),
        })
        .collect())
}
