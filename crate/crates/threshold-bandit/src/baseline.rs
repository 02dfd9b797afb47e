//! Uniform round-robin comparator with anytime confidence bounds.
//!
//! Pulls every arm in turn and stops the moment one arm's lower confidence
//! bound strictly clears the threshold (report that arm) or every arm's
//! upper bound falls strictly below it (report that no arm qualifies). The
//! overall failure budget is deflated to `delta' = 6*delta/pi^2` before the
//! per-arm split, so the union bound over every arm's anytime envelope sums
//! back to exactly `delta` and the guarantee is honest.
//!
//! This is the naive strategy the bracketed search is measured against: it
//! carries the same correctness guarantee but pays the full uniform-sampling
//! cost — every arm is pulled until the *slowest* stopping condition
//! resolves, instead of racing nested subsets.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::confidence::radius;
use crate::engine::{InstanceSampler, RewardSource};
use crate::instance::{BanditInstance, InstanceClass};
use crate::rng::RngStream;

/// Errors that abort a uniform run outright.
#[derive(Debug, Error, PartialEq)]
pub enum UniformError {
    #[error("boundary instance: an arm mean equals the threshold exactly, no finite-sample guarantee exists")]
    BoundaryInstance,
    #[error("tolerance must lie strictly inside (0, 1), got {0}")]
    BadTolerance(f64),
}

/// Everything a finished (or truncated) uniform run reports.
#[derive(Clone, Debug, Serialize)]
pub struct UniformOutcome {
    /// `Some(arm)` — its lower bound cleared the threshold; `None` — every
    /// arm's upper bound fell below it (or the run was truncated — check
    /// [`Self::truncated`]).
    pub answer: Option<usize>,
    /// Total draws.
    pub total_draws: u64,
    /// Draws per arm (global ids).
    pub per_arm_draws: Vec<u64>,
    /// The tolerance each arm's envelope ran with: `6 delta / pi^2`, split
    /// evenly across arms.
    pub arm_tolerance: f64,
    /// True when the safety cap stopped the run before a verdict.
    pub truncated: bool,
}

/// Runs the uniform comparator on `instance` with the given deterministic
/// stream. Draws cycle through the arms in id order; the run is reproducible
/// draw-for-draw from the stream alone.
pub fn run_uniform(
    instance: &BanditInstance,
    delta: f64,
    safety_cap: u64,
    stream: RngStream,
) -> Result<UniformOutcome, UniformError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(UniformError::BadTolerance(delta));
    }
    if instance.classify() == InstanceClass::Boundary {
        return Err(UniformError::BoundaryInstance);
    }
    let arm_count = instance.arm_count();
    let threshold = instance.threshold();
    let arm_tolerance = 6.0 * delta / (PI * PI) / arm_count as f64;

    let mut source = InstanceSampler::new(instance, stream.rng());
    let mut sums = vec![0.0f64; arm_count];
    let mut counts = vec![0u64; arm_count];
    let mut total: u64 = 0;

    loop {
        if total >= safety_cap {
            return Ok(UniformOutcome {
                answer: None,
                total_draws: total,
                per_arm_draws: counts,
                arm_tolerance,
                truncated: true,
            });
        }
        let arm = (total % arm_count as u64) as usize;
        sums[arm] += source.draw(arm);
        counts[arm] += 1;
        total += 1;

        // Only the pulled arm's bound moved, so checking it alone after each
        // pull catches every crossing the moment it happens.
        let r = radius(counts[arm], arm_tolerance).expect("positive count, validated tolerance");
        let mean = sums[arm] / counts[arm] as f64;
        if mean - r > threshold {
            return Ok(UniformOutcome {
                answer: Some(arm),
                total_draws: total,
                per_arm_draws: counts,
                arm_tolerance,
                truncated: false,
            });
        }
        let all_below = (0..arm_count).all(|a| {
            counts[a] > 0 && {
                let ra =
                    radius(counts[a], arm_tolerance).expect("positive count, validated tolerance");
                sums[a] / counts[a] as f64 + ra < threshold
            }
        });
        if all_below {
            return Ok(UniformOutcome {
                answer: None,
                total_draws: total,
                per_arm_draws: counts,
                arm_tolerance,
                truncated: false,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn stream(seed: u64) -> RngStream {
        RngStream::new(seed)
    }

    #[test]
    fn boundary_instances_are_rejected() {
        let instance = BanditInstance::gaussian(vec![0.5, 0.1], 0.5).unwrap();
        assert_eq!(
            run_uniform(&instance, 0.1, 1_000, stream(1)).unwrap_err(),
            UniformError::BoundaryInstance
        );
    }

    #[test]
    fn bad_tolerances_are_rejected() {
        let instance = BanditInstance::gaussian(vec![0.9, 0.1], 0.5).unwrap();
        assert_eq!(
            run_uniform(&instance, 0.0, 1_000, stream(1)).unwrap_err(),
            UniformError::BadTolerance(0.0)
        );
        assert_eq!(
            run_uniform(&instance, 1.0, 1_000, stream(1)).unwrap_err(),
            UniformError::BadTolerance(1.0)
        );
    }

    #[test]
    fn positive_instance_returns_the_qualified_arm() {
        let instance = BanditInstance::gaussian(vec![0.05, 0.95], 0.5).unwrap();
        let outcome = run_uniform(&instance, 0.1, 1_000_000, stream(11)).unwrap();
        assert_eq!(outcome.answer, Some(1));
        assert!(!outcome.truncated);
        assert_eq!(outcome.per_arm_draws.iter().sum::<u64>(), outcome.total_draws);
        // Round-robin keeps the per-arm counts within one draw of each other.
        let max = *outcome.per_arm_draws.iter().max().unwrap();
        let min = *outcome.per_arm_draws.iter().min().unwrap();
        assert!(max - min <= 1, "round-robin skew: {:?}", outcome.per_arm_draws);
    }

    #[test]
    fn negative_instance_concludes_none() {
        let instance = BanditInstance::gaussian(vec![0.05, 0.02], 0.5).unwrap();
        let outcome = run_uniform(&instance, 0.1, 1_000_000, stream(12)).unwrap();
        assert_eq!(outcome.answer, None);
        assert!(!outcome.truncated);
    }

    #[test]
    fn safety_cap_truncates_instead_of_failing() {
        // Tiny gaps force a long run; a small cap must stop it cleanly.
        let instance = BanditInstance::gaussian(vec![0.501, 0.499], 0.5).unwrap();
        let outcome = run_uniform(&instance, 0.1, 64, stream(13)).unwrap();
        assert!(outcome.truncated);
        assert_eq!(outcome.answer, None);
        assert_eq!(outcome.total_draws, 64);
    }

    #[test]
    fn runs_are_reproducible_from_the_stream() {
        let instance = BanditInstance::gaussian(vec![0.3, 0.8, 0.2], 0.55).unwrap();
        let a = run_uniform(&instance, 0.05, 1_000_000, stream(99)).unwrap();
        let b = run_uniform(&instance, 0.05, 1_000_000, stream(99)).unwrap();
        assert_eq!(a.answer, b.answer);
        assert_eq!(a.total_draws, b.total_draws);
        assert_eq!(a.per_arm_draws, b.per_arm_draws);
    }

    #[test]
    fn tolerance_deflation_matches_the_union_bound() {
        let instance = BanditInstance::gaussian(vec![0.9, 0.1], 0.5).unwrap();
        let outcome = run_uniform(&instance, 0.2, 1_000_000, stream(5)).unwrap();
        let expected = 6.0 * 0.2 / (PI * PI) / 2.0;
        assert!((outcome.arm_tolerance - expected).abs() < 1e-15);
    }
}
