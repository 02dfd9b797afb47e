//! Monte Carlo and exhaustive verification of the concentration facts the
//! engine's correctness rests on.
//!
//! Three suites: the anytime envelope coverage (the radius really does
//! contain the running mean at its stated confidence), the fixed-horizon
//! maximal inequality for Gaussian partial sums, and the sufficient-
//! sample-size implication (the explicit draw-count threshold really forces
//! the deviation envelope under the gap). Each returns a serializable report
//! with a `pass` flag; the CLI turns failed flags into exit code 2.
//!
//! Pass criteria are one-sided "empirical ≤ bound + 3 standard errors"
//! tests with the standard error taken at the bound value — the null being
//! rejected is "the true rate exceeds the guarantee".

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::confidence::{deviation_envelope, radius, sufficient_sample_size};
use crate::rng::RngStream;

/// Errors from malformed check parameters.
#[derive(Debug, Error, PartialEq)]
pub enum CheckError {
    #[error("tolerance must lie strictly inside (0, 1), got {0}")]
    BadTolerance(f64),
    #[error("horizon must be at least 2, got {0}")]
    HorizonTooShort(u64),
    #[error("at least one stream/sample is required")]
    NoSamples,
}

/// Outcome of the anytime-envelope coverage check.
#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationReport {
    /// Tolerance the envelope ran at.
    pub delta: f64,
    /// Independent partial-sum paths simulated.
    pub streams: u64,
    /// Length of each path.
    pub horizon: u64,
    /// Paths that escaped the envelope at least once.
    pub violations: u64,
    /// `violations / streams`.
    pub violation_fraction: f64,
    /// Theoretical ceiling `pi^2 delta / 6` on the escape probability.
    pub bound: f64,
    /// Binomial standard error of the bound at this sample size.
    pub standard_error: f64,
    /// `violation_fraction <= bound + 3 * standard_error`.
    pub pass: bool,
}

/// Simulates standard Gaussian partial-sum paths and counts how many ever
/// leave the anytime envelope `t * radius(t, delta)`. The guarantee says at
/// most a `pi^2 delta / 6` fraction may.
pub fn concentration_check(
    delta: f64,
    streams: u64,
    horizon: u64,
    stream: RngStream,
) -> Result<ConcentrationReport, CheckError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CheckError::BadTolerance(delta));
    }
    if horizon < 2 {
        return Err(CheckError::HorizonTooShort(horizon));
    }
    if streams == 0 {
        return Err(CheckError::NoSamples);
    }

    // One shared envelope table: the escape threshold on the raw sum at
    // each time step.
    let envelope: Vec<f64> = (1..=horizon)
        .map(|t| t as f64 * radius(t, delta).expect("tolerance validated"))
        .collect();

    let violations = (0..streams)
        .into_par_iter()
        .filter(|&index| {
            let mut rng = stream.substream(index).rng();
            let mut sum = 0.0f64;
            for bound in &envelope {
                let draw: f64 = StandardNormal.sample(&mut rng);
                sum += draw;
                if sum.abs() >= *bound {
                    return true;
                }
            }
            false
        })
        .count() as u64;

    let bound = std::f64::consts::PI.powi(2) * delta / 6.0;
    let standard_error = (bound.min(1.0) * (1.0 - bound.min(1.0)) / streams as f64).sqrt();
    let violation_fraction = violations as f64 / streams as f64;
    Ok(ConcentrationReport {
        delta,
        streams,
        horizon,
        violations,
        violation_fraction,
        bound,
        standard_error,
        pass: violation_fraction <= bound + 3.0 * standard_error,
    })
}

/// One cell of the maximal-inequality grid.
#[derive(Clone, Debug, Serialize)]
pub struct MaximalCell {
    /// Path length `n`.
    pub steps: u64,
    /// Per-step standard deviation.
    pub sigma: f64,
    /// Escape level `z`.
    pub threshold: f64,
    /// Monte Carlo frequency of `max partial sum > z`.
    pub empirical: f64,
    /// Theoretical ceiling `exp(-z^2 / (2 n sigma^2))`.
    pub bound: f64,
    /// Binomial standard error of the bound at this sample size.
    pub standard_error: f64,
    /// `empirical <= bound + 3 * standard_error`.
    pub pass: bool,
}

/// Outcome of the maximal-inequality grid check.
#[derive(Clone, Debug, Serialize)]
pub struct MaximalInequalityReport {
    /// Paths per grid cell.
    pub trials_per_cell: u64,
    /// All grid cells.
    pub cells: Vec<MaximalCell>,
    /// Conjunction of the per-cell flags.
    pub pass: bool,
}

/// Grid axes: path lengths, per-step deviations, and escape levels in units
/// of `sigma * sqrt(n)` (so every cell has comparable escape probability).
const MAXIMAL_STEPS: [u64; 4] = [4, 16, 64, 256];
const MAXIMAL_SIGMAS: [f64; 3] = [0.25, 0.5, 1.0];
const MAXIMAL_LEVELS: [f64; 3] = [1.0, 1.5, 2.0];

/// Checks the fixed-horizon maximal inequality for centered Gaussian walks:
/// the chance that the running sum ever exceeds `z` within `n` steps is at
/// most `exp(-z^2 / (2 n sigma^2))`.
pub fn maximal_inequality_check(
    trials_per_cell: u64,
    stream: RngStream,
) -> Result<MaximalInequalityReport, CheckError> {
    if trials_per_cell == 0 {
        return Err(CheckError::NoSamples);
    }
    let mut grid = Vec::new();
    for &steps in &MAXIMAL_STEPS {
        for &sigma in &MAXIMAL_SIGMAS {
            for &level in &MAXIMAL_LEVELS {
                grid.push((steps, sigma, level * sigma * (steps as f64).sqrt()));
            }
        }
    }

    let cells: Vec<MaximalCell> = grid
        .into_par_iter()
        .enumerate()
        .map(|(cell_index, (steps, sigma, threshold))| {
            let mut rng = stream.substream(cell_index as u64).rng();
            let mut exceed = 0u64;
            for _ in 0..trials_per_cell {
                let mut sum = 0.0f64;
                for _ in 0..steps {
                    let draw: f64 = StandardNormal.sample(&mut rng);
                    sum += sigma * draw;
                    if sum > threshold {
                        exceed += 1;
                        break;
                    }
                }
            }
            let bound =
                (-threshold * threshold / (2.0 * steps as f64 * sigma * sigma)).exp();
            let standard_error =
                (bound * (1.0 - bound) / trials_per_cell as f64).sqrt();
            let empirical = exceed as f64 / trials_per_cell as f64;
            MaximalCell {
                steps,
                sigma,
                threshold,
                empirical,
                bound,
                standard_error,
                pass: empirical <= bound + 3.0 * standard_error,
            }
        })
        .collect();

    let pass = cells.iter().all(|c| c.pass);
    Ok(MaximalInequalityReport { trials_per_cell, cells, pass })
}

/// Outcome of the sufficient-sample-size implication check.
#[derive(Clone, Debug, Serialize)]
pub struct SufficiencyReport {
    /// Random parameter tuples tested.
    pub samples: u64,
    /// Tuples where the envelope failed to drop below the gap.
    pub violations: u64,
    /// `violations == 0` (the implication is deterministic, not statistical).
    pub pass: bool,
}

/// Samples random valid parameter tuples (gap, arm count, tolerance,
/// multiplier), picks a draw count above the sufficient sample size, and
/// verifies the deviation envelope has dropped strictly below the gap.
pub fn sufficiency_implication_check(
    samples: u64,
    stream: RngStream,
) -> Result<SufficiencyReport, CheckError> {
    use rand::Rng;

    if samples == 0 {
        return Err(CheckError::NoSamples);
    }
    let mut rng = stream.rng();
    let mut violations = 0u64;
    for _ in 0..samples {
        let gap = 10f64.powf(rng.gen_range(-2.0..=0.0));
        let arm_count = rng.gen_range(2..=64usize);
        let delta = 10f64.powf(rng.gen_range(-4.0..0.0)) * 0.5;
        let multiplier = rng.gen_range(1.0..=3.0);
        let threshold = sufficient_sample_size(gap, arm_count, delta, multiplier)
            .expect("sampled inside the hypothesis region");
        let factor = 10f64.powf(rng.gen_range(0.0..=2.0));
        let t = (threshold * factor).ceil() as u64 + 1;
        if deviation_envelope(t, arm_count, delta, multiplier) >= gap {
            violations += 1;
        }
    }
    Ok(SufficiencyReport { samples, violations, pass: violations == 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concentration_holds_at_moderate_tolerance() {
        let report = concentration_check(0.05, 500, 1024, RngStream::new(41)).unwrap();
        assert!(report.pass, "violation {} vs bound {}", report.violation_fraction, report.bound);
        assert_eq!(report.streams, 500);
        assert!((report.bound - 0.0822467033424113).abs() < 1e-12);
    }

    #[test]
    fn concentration_envelope_is_sometimes_exceeded_at_huge_tolerance() {
        // Power check: with delta = 0.9 the envelope is tight enough that
        // violations must actually occur, so the detector is not vacuous.
        let report = concentration_check(0.9, 400, 2048, RngStream::new(42)).unwrap();
        assert!(report.violations > 0, "the check would be powerless");
    }

    #[test]
    fn concentration_envelope_matches_the_radius_at_t_equals_one() {
        let delta = 0.3;
        let envelope_at_1 = 1.0 * radius(1, delta).unwrap();
        assert!((envelope_at_1 - 2.0 * (2.0 / delta).ln().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn concentration_validates_parameters() {
        let s = RngStream::new(1);
        assert_eq!(concentration_check(0.0, 10, 16, s).unwrap_err(), CheckError::BadTolerance(0.0));
        assert_eq!(concentration_check(0.1, 10, 1, s).unwrap_err(), CheckError::HorizonTooShort(1));
        assert_eq!(concentration_check(0.1, 0, 16, s).unwrap_err(), CheckError::NoSamples);
    }

    #[test]
    fn maximal_inequality_holds_on_the_grid() {
        let report = maximal_inequality_check(500, RngStream::new(43)).unwrap();
        assert_eq!(report.cells.len(), 36);
        assert!(report.pass, "failing cells: {:?}", report
            .cells
            .iter()
            .filter(|c| !c.pass)
            .collect::<Vec<_>>());
    }

    #[test]
    fn maximal_inequality_bound_values_are_level_only() {
        // z = level * sigma * sqrt(n) makes the bound exp(-level^2/2),
        // independent of n and sigma.
        let report = maximal_inequality_check(10, RngStream::new(44)).unwrap();
        for cell in &report.cells {
            let level = cell.threshold / (cell.sigma * (cell.steps as f64).sqrt());
            assert!((cell.bound - (-level * level / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn sufficiency_implication_has_no_violations() {
        let report = sufficiency_implication_check(2_000, RngStream::new(45)).unwrap();
        assert!(report.pass, "{} violations", report.violations);
        assert_eq!(report.samples, 2_000);
    }
}
