//! Anytime confidence radii, interval bounds, and the phase schedule.
//!
//! The radius is a law-of-iterated-logarithm style envelope built on dyadic
//! blocks. With `e(t) = max{ceil(log2 t), 1}`:
//!
//! ```text
//! radius(t, delta) = sqrt(2 * 2^e(t) * ln(2 * e(t)^2 / delta)) / t      (t >= 1)
//! radius(0, delta) = +inf
//! ```
//!
//! A union bound over dyadic blocks makes the envelope hold *simultaneously
//! for all t* with probability at least `1 - pi^2 * delta / 6` for
//! 1-sub-Gaussian noise, which is what lets the engine check its intervals
//! after every single draw. The block trick pays a constant factor over the
//! fixed-horizon Hoeffding radius but removes the need to know the horizon.
//!
//! Phased parameters: phase `k >= 1` runs at tolerance `3^-k`, exploration
//! budget scale `2^k`, and exploitation confidence split `5^k`. Tolerances
//! shrink geometrically so the per-phase failure probabilities telescope; the
//! budget doubling keeps total work within a constant factor of the final
//! phase. Phases beyond [`MAX_PHASE`] signal a schedule overflow rather than
//! risking degenerate floating-point parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported phase index. At phase 60 the tolerance has reached
/// `3^-60 ~ 2.4e-29` and the budget scale `2^60`; any run still unfinished
/// has long since exhausted every practical sampling budget, and deeper
/// phases would add nothing but overflow risk.
pub const MAX_PHASE: u32 = 60;

/// Errors from the confidence and schedule calculations.
#[derive(Debug, Error, PartialEq)]
pub enum ConfidenceError {
    #[error("tolerance must lie in (0, 1), got {0}")]
    BadTolerance(f64),
    #[error("exploration lower bounds need a multiplier > 1, got {0}")]
    MultiplierTooSmall(f64),
    #[error("phase indices start at 1")]
    PhaseZero,
    #[error("phase schedule overflow: phase {phase} exceeds the supported maximum {MAX_PHASE}")]
    ScheduleOverflow { phase: u32 },
    #[error("need at least one arm, got {0}")]
    NoArms(usize),
    #[error("gap must lie in (0, 1], got {0}")]
    BadGap(f64),
    #[error("the sufficiency bound requires K >= 2, delta in (0, 1/2], C >= 1")]
    SufficiencyHypothesis,
}

/// Dyadic block index `e(t) = max{ceil(log2 t), 1}` for `t >= 1`.
///
/// Uses integer arithmetic (`next_power_of_two`) so the block boundary at
/// exact powers of two never suffers float rounding.
#[must_use]
pub fn dyadic_exponent(t: u64) -> u32 {
    debug_assert!(t >= 1, "dyadic blocks start at t = 1");
    t.next_power_of_two().trailing_zeros().max(1)
}

/// Anytime deviation radius for the empirical mean of `t` draws at
/// confidence `delta` (see module docs). `t = 0` yields `+inf`: an arm never
/// drawn is completely unknown, which the interval convention encodes as an
/// infinite-width interval.
pub fn radius(t: u64, delta: f64) -> Result<f64, ConfidenceError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConfidenceError::BadTolerance(delta));
    }
    if t == 0 {
        return Ok(f64::INFINITY);
    }
    let e = dyadic_exponent(t);
    let block = (2.0f64).powi(e as i32);
    let log_term = (2.0 * (e as f64) * (e as f64) / delta).ln();
    Ok((2.0 * block * log_term).sqrt() / t as f64)
}

/// Which side of which history a confidence bound refers to.
///
/// Exploration intervals watch arms still being probed; exploitation
/// intervals watch the single candidate arm during its verification run. The
/// widening multiplier `C` applies only to the exploration *lower* bound:
/// entering exploitation early (on an optimistic lower bound) is the one
/// mistake the algorithm cannot undo cheaply, so that side gets extra slack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    ExplorationUpper,
    ExplorationLower,
    ExploitationUpper,
    ExploitationLower,
}

/// Confidence bound for an empirical `mean` of `draws` samples at per-arm
/// tolerance `delta`. `multiplier` is the exploration widening factor `C`,
/// consulted only for [`BoundKind::ExplorationLower`] (where it must exceed
/// 1). Zero draws give `+inf` / `-inf` according to the bound's side.
pub fn bound(
    kind: BoundKind,
    mean: f64,
    draws: u64,
    delta: f64,
    multiplier: f64,
) -> Result<f64, ConfidenceError> {
    let r = radius(draws, delta)?;
    Ok(match kind {
        BoundKind::ExplorationUpper | BoundKind::ExploitationUpper => mean + r,
        BoundKind::ExploitationLower => mean - r,
        BoundKind::ExplorationLower => {
            if multiplier <= 1.0 {
                return Err(ConfidenceError::MultiplierTooSmall(multiplier));
            }
            mean - multiplier * r
        }
    })
}

/// Parameters of one phase of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    /// Phase tolerance `3^-k`; exploration intervals run at this confidence.
    pub tolerance: f64,
    /// Exploration budget scale `2^k`.
    pub budget_scale: f64,
    /// Exploitation confidence split `5^k`; the verification run at phase `k`
    /// spends `delta / split` of the overall budget.
    pub split: f64,
}

/// Schedule lookup for phase `k >= 1`; phases above [`MAX_PHASE`] overflow.
pub fn phase_params(k: u32) -> Result<PhaseParams, ConfidenceError> {
    if k == 0 {
        return Err(ConfidenceError::PhaseZero);
    }
    if k > MAX_PHASE {
        return Err(ConfidenceError::ScheduleOverflow { phase: k });
    }
    Ok(PhaseParams {
        tolerance: (3.0f64).powi(k as i32).recip(),
        budget_scale: (2.0f64).powi(k as i32),
        split: (5.0f64).powi(k as i32),
    })
}

fn validate_budget_args(k: u32, arm_count: usize, multiplier: f64) -> Result<PhaseParams, ConfidenceError> {
    if arm_count == 0 {
        return Err(ConfidenceError::NoArms(arm_count));
    }
    if multiplier <= 1.0 {
        return Err(ConfidenceError::MultiplierTooSmall(multiplier));
    }
    phase_params(k)
}

/// Per-arm exploration draw budget at phase `k`:
/// `(C+1)^2 * 2^k * ln(4K / 3^-k)` for `K` total arms and widening factor
/// `C`. Once every bracket arm reaches this budget the phase has extracted
/// all the confidence its tolerance supports and the engine moves on.
pub fn exploration_budget(k: u32, arm_count: usize, multiplier: f64) -> Result<f64, ConfidenceError> {
    let params = validate_budget_args(k, arm_count, multiplier)?;
    let c1 = multiplier + 1.0;
    Ok(c1 * c1 * params.budget_scale * (4.0 * arm_count as f64 / params.tolerance).ln())
}

/// Exploitation draw budget at phase `k`:
/// `((C+3)/(C-1))^2 * 2^k * ln(4K * 5^k / delta)`, where `delta` is the
/// copy's overall tolerance. The `(C-1)` denominator is why the widening
/// factor must stay strictly above 1: a candidate that barely cleared the
/// widened entry bound needs `~(C-1)^-2` extra verification draws.
pub fn exploitation_budget(
    k: u32,
    arm_count: usize,
    delta: f64,
    multiplier: f64,
) -> Result<f64, ConfidenceError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConfidenceError::BadTolerance(delta));
    }
    let params = validate_budget_args(k, arm_count, multiplier)?;
    let ratio = (multiplier + 3.0) / (multiplier - 1.0);
    Ok(ratio * ratio * params.budget_scale * (4.0 * arm_count as f64 * params.split / delta).ln())
}

/// Sample size past which the deviation envelope provably drops below `gap`:
///
/// ```text
/// threshold = 28 C^2 ln(2K/delta) / gap^2  +  16 C^2 ln(ln(24 C^2 / gap^2)) / gap^2
/// ```
///
/// For any `t > threshold`, `deviation_envelope(t, ..) < gap` (hypotheses:
/// `gap` in (0, 1], `K >= 2`, `delta` in (0, 1/2], `C >= 1`). This converts
/// the implicit "radius below gap" stopping times into explicit sample-count
/// bounds.
pub fn sufficient_sample_size(
    gap: f64,
    arm_count: usize,
    delta: f64,
    multiplier: f64,
) -> Result<f64, ConfidenceError> {
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(ConfidenceError::BadGap(gap));
    }
    if arm_count < 2 || !(delta > 0.0 && delta <= 0.5) || multiplier < 1.0 {
        return Err(ConfidenceError::SufficiencyHypothesis);
    }
    let c2 = multiplier * multiplier;
    let gap2 = gap * gap;
    let first = 28.0 * c2 * (2.0 * arm_count as f64 / delta).ln() / gap2;
    let second = 16.0 * c2 * (24.0 * c2 / gap2).ln().ln() / gap2;
    Ok(first + second)
}

/// The closed-form deviation envelope `C * sqrt(4 ln(2K (log2 2t)^2 / delta) / t)`
/// that [`sufficient_sample_size`] controls. It upper-bounds
/// `C * radius(t, delta/K)` for all `t >= 1`.
#[must_use]
pub fn deviation_envelope(t: u64, arm_count: usize, delta: f64, multiplier: f64) -> f64 {
    let t_f = t as f64;
    let log_sq = (2.0 * t_f).log2().powi(2);
    multiplier * (4.0 * (2.0 * arm_count as f64 * log_sq / delta).ln() / t_f).sqrt()
}

/// Whether `t` clears [`sufficient_sample_size`] for these parameters.
pub fn exceeds_sufficient_sample_size(
    t: u64,
    gap: f64,
    arm_count: usize,
    delta: f64,
    multiplier: f64,
) -> Result<bool, ConfidenceError> {
    Ok(t as f64 > sufficient_sample_size(gap, arm_count, delta, multiplier)?)
}
