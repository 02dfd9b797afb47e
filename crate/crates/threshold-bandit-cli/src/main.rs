//! `tbandit` — command-line front end for the threshold-bandit toolkit.
//!
//! Subcommands: `run` (Monte Carlo experiments from a config file), `bounds`
//! (sample-complexity bound tables for an instance file), `bracket-stats`
//! (random-prefix bracket placement tables), and the verification pair
//! `check-concentration` / `check-lemmas`, which exit with status 2 when a
//! statistical guarantee is observed to fail.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use threshold_bandit::bounds::{solve_lb_program, upper_bounds, LowerBoundReport, UpperBoundReport};
use threshold_bandit::checks::{
    concentration_check, maximal_inequality_check, sufficiency_implication_check,
};
use threshold_bandit::instance::{BanditInstance, InstanceClass};
use threshold_bandit::rng::RngStream;
use threshold_bandit::sim::{bracket_stats, run_experiment, write_outputs, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "tbandit",
    version,
    about = "Threshold-bandit identification: experiments, bounds, and verification",
    long_about = "Threshold-bandit identification toolkit.\n\n\
        Given K arms and a threshold, the task is to name one arm whose mean\n\
        exceeds the threshold, or to certify that none does, with error\n\
        probability at most a chosen tolerance. This tool runs the bracketed\n\
        phased search and a uniform-sampling baseline over Monte Carlo trials,\n\
        evaluates sample-complexity lower/upper bounds, and verifies the\n\
        concentration guarantees the algorithms rely on.\n\n\
        All randomness derives from explicit seeds: identical inputs and seeds\n\
        reproduce byte-identical CSV/JSON outputs."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Run(RunArgs),
    Bounds(BoundsArgs),
    BracketStats(BracketStatsArgs),
    CheckConcentration(CheckConcentrationArgs),
    CheckLemmas(CheckLemmasArgs),
}

/// Run a Monte Carlo experiment described by a TOML config file.
#[derive(Args)]
#[command(long_about = "Run a Monte Carlo experiment described by a TOML config file.\n\n\
    The config names an instance (inline or by path, relative to the config\n\
    file), an algorithm (\"bracketed\" or \"uniform-lil\"), a list of error\n\
    tolerances, a trial count, and a base seed. Trials run in parallel but\n\
    merge in trial order, so outputs are byte-deterministic.\n\n\
    The uniform-lil baseline splits its tolerance across arms and applies the\n\
    correction delta' = (6 delta / pi^2) / K to each per-arm confidence\n\
    sequence, so that the union over all arms and all times stays below\n\
    delta; its stated guarantee is therefore honest, not approximate.\n\n\
    Outputs: a summary CSV (one row per tolerance), a JSON mirror of the\n\
    summary, and optionally per-trial JSONL traces (emit_traces = true).")]
struct RunArgs {
    /// Path to the experiment config (TOML).
    config: PathBuf,
    /// Write the summary CSV here instead of the config's `output` path.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Print sample-complexity bound tables for an instance file.
#[derive(Args)]
#[command(long_about = "Print sample-complexity bound tables for an instance file.\n\n\
    For a positive instance (at least one arm above the threshold) this\n\
    evaluates the closed-form lower bound with its per-rank decomposition,\n\
    solves the selection-weight program numerically (projected subgradient,\n\
    deterministic in --seed), reports the explicit dual certificate, and\n\
    prints the algorithm-side guarantee shapes. For a negative instance only\n\
    the rejection-side guarantee applies. All values omit universal proof\n\
    constants; compare shapes and ratios, not absolute levels.")]
struct BoundsArgs {
    /// Path to the instance file (TOML).
    instance: PathBuf,
    /// Error tolerance the bounds are evaluated at.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Relative agreement band for the solver's convergence flag.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Seed for the solver restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the report as JSON instead of a text table.
    #[arg(long)]
    json: bool,
}

/// Tabulate where the best arms land among the nested random brackets.
#[derive(Args)]
#[command(long_about = "Tabulate where the best arms land among the nested random brackets.\n\n\
    Brackets are nested prefixes (sizes 1, 2, 4, ...) of one uniformly random\n\
    arm order. For each cutoff b the table reports the probability that none\n\
    of the --top best arms appears in any bracket smaller than b: a Monte\n\
    Carlo estimate over --samples shuffles, the closed-form tail bound, and\n\
    (for at most 7 arms) the exact probability by enumeration.")]
struct BracketStatsArgs {
    /// Number of arms.
    #[arg(long)]
    arms: usize,
    /// Size of the best-arm set being tracked.
    #[arg(long, default_value_t = 1)]
    top: usize,
    /// Random shuffles to sample.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Seed for the shuffles.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the table as JSON instead of text.
    #[arg(long)]
    json: bool,
}

/// Verify the anytime confidence envelope by simulation (exit 2 on failure).
#[derive(Args)]
#[command(long_about = "Verify the anytime confidence envelope by simulation.\n\n\
    Simulates standard Gaussian partial-sum paths and counts how many ever\n\
    escape the envelope t * radius(t, delta). The guarantee caps the escape\n\
    probability at pi^2 * delta / 6; the check fails (exit status 2) when\n\
    the observed fraction exceeds that bound by more than 3 standard errors.")]
struct CheckConcentrationArgs {
    /// Tolerance(s) to test; repeat the flag to test several.
    #[arg(long, default_values_t = [0.05])]
    delta: Vec<f64>,
    /// Independent paths per tolerance.
    #[arg(long, default_value_t = 2_000)]
    streams: u64,
    /// Length of each path.
    #[arg(long, default_value_t = 4_096)]
    horizon: u64,
    /// Seed for the paths.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Run every statistical property suite (exit 2 on any failure).
#[derive(Args)]
#[command(long_about = "Run every statistical property suite.\n\n\
    Three suites: the fixed-horizon maximal inequality for Gaussian walks on\n\
    a (steps, sigma, level) grid; the sufficient-sample-size implication on\n\
    random parameter tuples; and the anytime envelope coverage at each\n\
    --delta. Any observed violation beyond the stated statistical slack\n\
    makes the command exit with status 2.")]
struct CheckLemmasArgs {
    /// Random tuples for the sufficient-sample-size implication.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Paths per cell of the maximal-inequality grid.
    #[arg(long, default_value_t = 2_000)]
    trials: u64,
    /// Paths per tolerance for the envelope check.
    #[arg(long, default_value_t = 2_000)]
    streams: u64,
    /// Length of each envelope-check path.
    #[arg(long, default_value_t = 4_096)]
    horizon: u64,
    /// Tolerance(s) for the envelope check.
    #[arg(long, default_values_t = [0.05, 0.2])]
    delta: Vec<f64>,
    /// Base seed for all three suites.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::BracketStats(args) => cmd_bracket_stats(args),
        Command::CheckConcentration(args) => cmd_check_concentration(args),
        Command::CheckLemmas(args) => cmd_check_lemmas(args),
    };
    match result {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let config = ExperimentConfig::from_path(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    let base_dir = args.config.parent().map_or_else(|| Path::new(".").to_path_buf(), Path::to_path_buf);

    let report = run_experiment(&config, &base_dir).context("running the experiment")?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }

    // Output priority: --output flag, then the config's `output` key
    // (relative to the config file, like instance paths), then the config
    // path with a .csv extension.
    let csv_path = match (&args.output, &config.output) {
        (Some(path), _) => path.clone(),
        (None, Some(path)) if path.is_relative() => base_dir.join(path),
        (None, Some(path)) => path.clone(),
        (None, None) => args.config.with_extension("csv"),
    };
    if let Some(parent) = csv_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating output directory {}", parent.display()))?;
        }
    }
    let written =
        write_outputs(&report, &csv_path, config.emit_traces).context("writing outputs")?;

    println!(
        "{:<12} {:>9} {:>7} {:>7} {:>11} {:>12} {:>12} {:>10} {:>9}",
        "algorithm", "delta", "trials", "errors", "error_rate", "wilson_hi", "mean_tau", "max_tau", "anomalies"
    );
    for row in &report.rows {
        println!(
            "{:<12} {:>9} {:>7} {:>7} {:>11.5} {:>12.5} {:>12.1} {:>10} {:>9}",
            row.algorithm,
            row.delta,
            row.trials,
            row.errors,
            row.error_rate,
            row.error_wilson_hi,
            row.mean_tau,
            row.max_tau,
            row.anomalies
        );
    }
    println!("wrote {}", written.csv.display());
    println!("wrote {}", written.summary_json.display());
    if let Some(traces) = &written.traces {
        println!("wrote {}", traces.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Everything `bounds` prints, in one JSON-friendly shape.
#[derive(serde::Serialize)]
struct BoundsOutput {
    delta: f64,
    class: String,
    lower: Option<LowerBoundReport>,
    upper: UpperBoundReport,
}

fn cmd_bounds(args: BoundsArgs) -> Result<ExitCode> {
    let (instance, warnings) = BanditInstance::from_path(&args.instance)
        .with_context(|| format!("loading instance {}", args.instance.display()))?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }

    let class = instance.classify();
    if class == InstanceClass::Boundary {
        bail!("an arm sits exactly on the threshold; bounds are undefined there");
    }
    let lower = match class {
        InstanceClass::Positive { .. } => Some(
            solve_lb_program(&instance, args.delta, args.tol, RngStream::new(args.seed))
                .context("solving the lower-bound program")?,
        ),
        _ => None,
    };
    let upper = upper_bounds(&instance, args.delta).context("evaluating upper bounds")?;

    let class_name = match class {
        InstanceClass::Positive { qualified_count } => format!("positive (m = {qualified_count})"),
        InstanceClass::Negative => "negative".to_string(),
        InstanceClass::Boundary => unreachable!("rejected above"),
    };

    if args.json {
        let output = BoundsOutput { delta: args.delta, class: class_name, lower, upper };
        println!("{}", serde_json::to_string_pretty(&output)?);
        return Ok(ExitCode::SUCCESS);
    }

    println!("instance: {} arms, threshold {}, {}", instance.arm_count(), instance.threshold(), class_name);
    println!("delta:    {}", args.delta);
    println!();
    if let Some(lower) = &lower {
        println!("lower bounds (constant-free)");
        println!("  closed form        {:>14.4}", lower.closed_form);
        println!(
            "  program value      {:>14.4}   (converged: {})",
            lower.program_value, lower.program_converged
        );
        println!("  dual certificate   {:>14.4}", lower.dual_value);
        println!(
            "  small-delta hypothesis holds: {}",
            if lower.delta_hypothesis_ok { "yes" } else { "no (values still reported)" }
        );
        println!();
        println!("  per-rank closed-form decomposition");
        println!("  {:>4} {:>4} {:>14} {:>14} {:>14}", "rank", "arm", "tolerance", "structure", "total");
        for term in &lower.per_rank {
            println!(
                "  {:>4} {:>4} {:>14.4} {:>14.4} {:>14.4}",
                term.rank, term.arm, term.tolerance_term, term.structure_term, term.total
            );
        }
        println!();
        println!("  program argmin (selection weights per qualified rank)");
        for (index, weight) in lower.program_argmin.iter().enumerate() {
            println!("  rank {:>2}: {:.6}", index + 1, weight);
        }
        println!();
    } else {
        println!("lower bounds: not applicable (no arm exceeds the threshold)");
        println!();
    }
    println!("upper bounds (constant-free guarantee shapes)");
    println!("  accept (positive case) {:>14.4}", upper.accept);
    println!("  reject (negative case) {:>14.4}", upper.reject);
    if !upper.accept_per_rank.is_empty() {
        println!("  accept per rank");
        for (index, value) in upper.accept_per_rank.iter().enumerate() {
            println!("  rank {:>2}: {:>14.4}", index + 1, value);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bracket_stats(args: BracketStatsArgs) -> Result<ExitCode> {
    let rows = bracket_stats(args.arms, args.top, args.samples, RngStream::new(args.seed))
        .context("building bracket statistics")?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(ExitCode::SUCCESS);
    }
    println!(
        "probability that the best {} arm(s) all miss every bracket below the cutoff ({} arms, {} samples)",
        args.top, args.arms, args.samples
    );
    println!("{:>6} {:>12} {:>12} {:>12}", "cutoff", "empirical", "bound", "exact");
    for row in &rows {
        match row.exact {
            Some(exact) => println!(
                "{:>6} {:>12.6} {:>12.6} {:>12.6}",
                row.cutoff, row.empirical, row.bound, exact
            ),
            None => println!(
                "{:>6} {:>12.6} {:>12.6} {:>12}",
                row.cutoff, row.empirical, row.bound, "-"
            ),
        }
    }
    Ok(ExitCode::SUCCESS)
}

const CHECK_VIOLATION: u8 = 2;

fn cmd_check_concentration(args: CheckConcentrationArgs) -> Result<ExitCode> {
    let mut all_pass = true;
    for (index, &delta) in args.delta.iter().enumerate() {
        let report = concentration_check(
            delta,
            args.streams,
            args.horizon,
            RngStream::new(args.seed).substream(index as u64),
        )
        .context("running the concentration check")?;
        println!(
            "delta {:>6}: {}/{} paths escaped ({:.5}); bound {:.5} + 3se {:.5} -> {}",
            delta,
            report.violations,
            report.streams,
            report.violation_fraction,
            report.bound,
            3.0 * report.standard_error,
            if report.pass { "pass" } else { "FAIL" }
        );
        all_pass &= report.pass;
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(CHECK_VIOLATION) })
}

fn cmd_check_lemmas(args: CheckLemmasArgs) -> Result<ExitCode> {
    let base = RngStream::new(args.seed);
    let mut all_pass = true;

    let maximal = maximal_inequality_check(args.trials, base.substream(1))
        .context("running the maximal-inequality suite")?;
    let worst = maximal
        .cells
        .iter()
        .map(|c| c.empirical - c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "maximal inequality : {} cells x {} paths, worst excess {:+.5} -> {}",
        maximal.cells.len(),
        maximal.trials_per_cell,
        worst,
        if maximal.pass { "pass" } else { "FAIL" }
    );
    all_pass &= maximal.pass;

    let sufficiency = sufficiency_implication_check(args.samples, base.substream(2))
        .context("running the sufficiency suite")?;
    println!(
        "sufficiency        : {} tuples, {} violations -> {}",
        sufficiency.samples,
        sufficiency.violations,
        if sufficiency.pass { "pass" } else { "FAIL" }
    );
    all_pass &= sufficiency.pass;

    for (index, &delta) in args.delta.iter().enumerate() {
        let report = concentration_check(
            delta,
            args.streams,
            args.horizon,
            base.substream(3 + index as u64),
        )
        .context("running the envelope suite")?;
        println!(
            "envelope delta {:>4}: {:.5} escaped vs bound {:.5} + 3se {:.5} -> {}",
            delta,
            report.violation_fraction,
            report.bound,
            3.0 * report.standard_error,
            if report.pass { "pass" } else { "FAIL" }
        );
        all_pass &= report.pass;
    }

    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(CHECK_VIOLATION) })
}
