//! Theoretical sample-complexity bounds for an instance.
//!
//! Lower-bound side: a closed-form expression, a small convex program whose
//! optimum sharpens it (solved numerically, with a grid oracle for
//! cross-checking and a dual feasible point certifying the value from
//! below), and the per-arm forced-pull floor that drives both. Upper-bound
//! side: the algorithm's guarantee formulas for positive and negative
//! instances.
//!
//! Everything here is *constant-free*: universal constants from the proofs
//! are deliberately omitted (reports carry a flag saying so), because these
//! quantities are for shape comparisons — how cost scales with gaps, arm
//! count, and tolerance — not absolute draw counts.

use serde::Serialize;
use thiserror::Error;

use crate::complexity::ComplexityProfile;
use crate::instance::{BanditInstance, InstanceClass};
use crate::rng::RngStream;

/// Restarts of the projected-subgradient solver.
const SOLVER_RESTARTS: usize = 10;
/// Iterations per restart.
const SOLVER_ITERATIONS: usize = 10_000;
/// Grid step of the verification oracle (on the half-mass slice).
const GRID_STEP: f64 = 1e-3;
/// Largest qualified count the grid oracle enumerates.
pub const MAX_GRID_QUALIFIED: usize = 3;

/// Errors from bound evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("lower bounds need a qualified arm: instance classifies as {0:?}")]
    NotPositive(InstanceClass),
    #[error("boundary instance: an arm mean equals the threshold exactly")]
    BoundaryInstance,
    #[error("tolerance must lie strictly inside (0, 1), got {0}")]
    BadTolerance(f64),
    #[error("qualified rank {rank} out of range 1..={qualified}")]
    RankOutOfRange { rank: usize, qualified: usize },
    #[error("arm rank {rank} out of range 1..={arm_count}")]
    ArmRankOutOfRange { rank: usize, arm_count: usize },
    #[error("selection weight must lie in (0, 1], got {0}")]
    BadWeight(f64),
    #[error("both separating gaps are zero; the floor is undefined")]
    ZeroDenominator,
    #[error("grid oracle only enumerates up to {MAX_GRID_QUALIFIED} qualified arms, instance has {0}")]
    GridTooLarge(usize),
}

/// One row of the closed-form decomposition: the cost of a strategy that
/// stops via the rank-`rank` qualified arm.
#[derive(Clone, Debug, Serialize)]
pub struct RankTerm {
    /// 1-based rank in the descending-mean order.
    pub rank: usize,
    /// Global 0-based id of that arm.
    pub arm: usize,
    /// Tolerance-driven part: `ln(1/delta) / gap(rank, threshold)^2`.
    pub tolerance_term: f64,
    /// Structure-driven part: per-rank cost divided by `ln^2(m+1)`.
    pub structure_term: f64,
    /// Sum of the two.
    pub total: f64,
}

/// Full lower-bound evaluation of one positive instance.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    /// Minimum over ranks of the closed-form terms.
    pub closed_form: f64,
    /// Per-rank decomposition behind [`Self::closed_form`].
    pub per_rank: Vec<RankTerm>,
    /// Optimum value of the selection-weight program (numerical).
    pub program_value: f64,
    /// Argmin weights, one per qualified rank.
    pub program_argmin: Vec<f64>,
    /// True when at least half the solver restarts agreed with the best
    /// value within the requested tolerance.
    pub program_converged: bool,
    /// Value certified from below by the explicit dual feasible point.
    pub dual_value: f64,
    /// Whether the closed form's small-tolerance hypothesis
    /// `delta < min(1e-8, 1/(64 m^2))` holds; the values are reported either
    /// way, this only qualifies their interpretation.
    pub delta_hypothesis_ok: bool,
    /// Number of qualified arms `m`.
    pub qualified_count: usize,
}

/// Algorithm-side guarantee formulas (shape only; constants omitted).
#[derive(Clone, Debug, Serialize)]
pub struct UpperBoundReport {
    /// Per qualified rank: the positive-case guarantee through that rank;
    /// empty when no arm qualifies.
    pub accept_per_rank: Vec<f64>,
    /// Minimum over the finite per-rank entries; `+inf` when none.
    pub accept: f64,
    /// Negative-case guarantee (certifying that no arm qualifies).
    pub reject: f64,
    /// Always true: universal proof constants are omitted from every entry.
    pub constants_omitted: bool,
}

fn validate_tolerance(delta: f64) -> Result<(), BoundsError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(BoundsError::BadTolerance(delta))
    }
}

fn require_positive(instance: &BanditInstance) -> Result<ComplexityProfile, BoundsError> {
    match instance.classify() {
        InstanceClass::Positive { .. } => Ok(ComplexityProfile::of(instance)),
        other => Err(BoundsError::NotPositive(other)),
    }
}

/// The selection-weight rate `p / (1 + ln(1/p))`, extended to `0` at `p = 0`
/// by continuity. Convex and increasing on `[0, 1]`.
fn selection_rate(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p / (1.0 + (1.0 / p).ln())
    }
}

/// Derivative of [`selection_rate`] on `(0, 1]`; `0` at `p = 0` (its limit).
fn selection_rate_slope(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        let d = 1.0 + (1.0 / p).ln();
        1.0 / d + 1.0 / (d * d)
    }
}

/// Objective of the lower-bound program in minimized form.
///
/// The program assigns a selection weight `p_j in [0, 1]` to each qualified
/// rank, with total weight at least one half, and pays the worst of:
/// the tolerance cost `sum_j p_j * ln(1/delta) / gap_j^2` (one affine term),
/// and for each rank the structure cost `S_j * rate(p_j)` where `S_j` sums
/// the inverse squared separating gaps of every arm against that rank. Both
/// pieces increase coordinate-wise, so the optimum puts exactly half the
/// mass; the max of affine and convex terms is convex.
#[derive(Clone, Debug)]
pub struct ProgramObjective {
    tolerance_weights: Vec<f64>,
    structure_scales: Vec<f64>,
}

impl ProgramObjective {
    /// Builds the objective for a positive instance at tolerance `delta`.
    pub fn from_instance(instance: &BanditInstance, delta: f64) -> Result<Self, BoundsError> {
        validate_tolerance(delta)?;
        let profile = require_positive(instance)?;
        Ok(Self::from_profile(&profile, delta))
    }

    fn from_profile(profile: &ComplexityProfile, delta: f64) -> Self {
        let log_inv_delta = (1.0 / delta).ln();
        let m = profile.qualified_count;
        let tolerance_weights = (1..=m)
            .map(|j| {
                let gap = profile.rank_gap_to_threshold(j);
                log_inv_delta / (gap * gap)
            })
            .collect();
        let structure_scales =
            (1..=m).map(|j| j as f64 * profile.rank_cost[j - 1]).collect();
        Self { tolerance_weights, structure_scales }
    }

    /// Number of qualified ranks (the program dimension).
    #[must_use]
    pub fn dim(&self) -> usize {
        self.tolerance_weights.len()
    }

    /// Objective value at weights `p` (not necessarily feasible).
    #[must_use]
    pub fn value(&self, p: &[f64]) -> f64 {
        assert_eq!(p.len(), self.dim(), "weight vector has wrong length");
        let tolerance_part: f64 =
            p.iter().zip(&self.tolerance_weights).map(|(x, w)| x * w).sum();
        let structure_part = p
            .iter()
            .zip(&self.structure_scales)
            .map(|(&x, s)| s * selection_rate(x))
            .fold(f64::NEG_INFINITY, f64::max);
        tolerance_part.max(structure_part)
    }

    /// A subgradient of the max-objective at `p`, written into `out`.
    fn subgradient_into(&self, p: &[f64], out: &mut [f64]) {
        let tolerance_part: f64 =
            p.iter().zip(&self.tolerance_weights).map(|(x, w)| x * w).sum();
        let (best_j, structure_part) = p
            .iter()
            .zip(&self.structure_scales)
            .map(|(&x, s)| s * selection_rate(x))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        if tolerance_part >= structure_part {
            out.copy_from_slice(&self.tolerance_weights);
        } else {
            out.fill(0.0);
            out[best_j] =
                self.structure_scales[best_j] * selection_rate_slope(p[best_j]);
        }
    }
}

/// Euclidean projection onto `{p in [0,1]^m : sum p >= 1/2}` in place.
fn project_feasible(p: &mut [f64]) {
    let clipped_sum: f64 = p.iter().map(|x| x.clamp(0.0, 1.0)).sum();
    if clipped_sum >= 0.5 {
        for x in p.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
        return;
    }
    // Water-fill: raise every coordinate by a common offset before clipping
    // until the half-mass constraint binds. The offset -> mass map is
    // continuous and nondecreasing, so bisection nails it.
    let min_coord = p.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0f64, 0.5 - min_coord);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = p.iter().map(|x| (x + mid).clamp(0.0, 1.0)).sum();
        if mass < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for x in p.iter_mut() {
        *x = (*x + hi).clamp(0.0, 1.0);
    }
}

/// Closed-form lower bound: the cheapest per-rank stopping cost.
pub fn closed_form_lower_bound(
    instance: &BanditInstance,
    delta: f64,
) -> Result<f64, BoundsError> {
    let terms = closed_form_terms(instance, delta)?;
    Ok(terms.iter().map(|t| t.total).fold(f64::INFINITY, f64::min))
}

/// Per-rank decomposition of the closed-form lower bound.
pub fn closed_form_terms(
    instance: &BanditInstance,
    delta: f64,
) -> Result<Vec<RankTerm>, BoundsError> {
    validate_tolerance(delta)?;
    let profile = require_positive(instance)?;
    let m = profile.qualified_count;
    let log_inv_delta = (1.0 / delta).ln();
    let norm = ((m + 1) as f64).ln().powi(2);
    Ok((1..=m)
        .map(|j| {
            let gap = profile.rank_gap_to_threshold(j);
            let tolerance_term = log_inv_delta / (gap * gap);
            let structure_term = profile.rank_cost[j - 1] / norm;
            RankTerm {
                rank: j,
                arm: profile.ranking[j - 1],
                tolerance_term,
                structure_term,
                total: tolerance_term + structure_term,
            }
        })
        .collect())
}

/// Value certified from below by the explicit dual feasible point of the
/// selection-weight program.
pub fn dual_feasible_value(instance: &BanditInstance, delta: f64) -> Result<f64, BoundsError> {
    validate_tolerance(delta)?;
    let profile = require_positive(instance)?;
    let m = profile.qualified_count;
    let log_inv_delta = (1.0 / delta).ln();
    let damping = (1.0 + ((m + 1) as f64).ln()) * (1.0 + 200f64.ln() + (m as f64).ln());
    let certified = (1..=m)
        .map(|j| {
            let gap = profile.rank_gap_to_threshold(j);
            0.5 * log_inv_delta / (gap * gap) + 0.5 * profile.rank_cost[j - 1] / damping
        })
        .fold(f64::INFINITY, f64::min);
    Ok(certified / 4.0)
}

/// Exhaustive oracle for the selection-weight program: enumerates the
/// half-mass slice on a `1e-3` grid. Only for small qualified counts (the
/// optimum lies on the slice because the objective increases
/// coordinate-wise). Returns `(value, argmin)`.
pub fn grid_lower_bound(
    instance: &BanditInstance,
    delta: f64,
) -> Result<(f64, Vec<f64>), BoundsError> {
    let objective = ProgramObjective::from_instance(instance, delta)?;
    let m = objective.dim();
    if m > MAX_GRID_QUALIFIED {
        return Err(BoundsError::GridTooLarge(m));
    }
    let steps = (0.5 / GRID_STEP).round() as usize; // inclusive upper index
    let mut best = (f64::INFINITY, vec![0.0; m]);
    let mut consider = |p: Vec<f64>| {
        let v = objective.value(&p);
        if v < best.0 {
            best = (v, p);
        }
    };
    match m {
        1 => consider(vec![0.5]),
        2 => {
            for i in 0..=steps {
                let a = i as f64 * GRID_STEP;
                consider(vec![a, 0.5 - a]);
            }
        }
        3 => {
            for i in 0..=steps {
                let a = i as f64 * GRID_STEP;
                for k in 0..=(steps - i) {
                    let b = k as f64 * GRID_STEP;
                    consider(vec![a, b, 0.5 - a - b]);
                }
            }
        }
        _ => unreachable!("qualified counts above {MAX_GRID_QUALIFIED} rejected above"),
    }
    Ok(best)
}

/// Solves the selection-weight program by projected subgradient descent
/// with random restarts and assembles the full lower-bound report.
///
/// `tol` is the relative agreement band for the convergence flag: the run
/// counts as converged when at least half the restarts finish within
/// `tol` of the best value found. Deterministic given `stream`.
pub fn solve_lb_program(
    instance: &BanditInstance,
    delta: f64,
    tol: f64,
    stream: RngStream,
) -> Result<LowerBoundReport, BoundsError> {
    use rand::Rng;

    validate_tolerance(delta)?;
    let profile = require_positive(instance)?;
    let m = profile.qualified_count;
    let objective = ProgramObjective::from_profile(&profile, delta);

    let mut best_value = f64::INFINITY;
    let mut best_point = vec![0.0; m];
    let mut restart_bests = Vec::with_capacity(SOLVER_RESTARTS);
    let mut gradient = vec![0.0; m];
    let step_scale = 0.25 * (m as f64).sqrt();

    for restart in 0..SOLVER_RESTARTS {
        let mut rng = stream.substream(restart as u64).rng();
        let mut p: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        project_feasible(&mut p);
        let mut restart_best = f64::INFINITY;
        for iteration in 1..=SOLVER_ITERATIONS {
            let value = objective.value(&p);
            if value < restart_best {
                restart_best = value;
                if value < best_value {
                    best_value = value;
                    best_point.copy_from_slice(&p);
                }
            }
            objective.subgradient_into(&p, &mut gradient);
            let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            let step = step_scale / (iteration as f64).sqrt() / norm;
            for (x, g) in p.iter_mut().zip(&gradient) {
                *x -= step * g;
            }
            project_feasible(&mut p);
        }
        restart_bests.push(restart_best);
    }

    // The uniform half-mass point is always feasible; keep it as a candidate
    // so the reported value never exceeds this natural benchmark.
    let uniform = vec![0.5 / m as f64; m];
    let uniform_value = objective.value(&uniform);
    if uniform_value < best_value {
        best_value = uniform_value;
        best_point = uniform;
    }

    let band = tol.max(0.0) * best_value.abs().max(1.0);
    let agreeing = restart_bests.iter().filter(|b| **b <= best_value + band).count();
    let program_converged = 2 * agreeing >= SOLVER_RESTARTS;

    let per_rank = closed_form_terms(instance, delta)?;
    let closed_form = per_rank.iter().map(|t| t.total).fold(f64::INFINITY, f64::min);
    let dual_value = dual_feasible_value(instance, delta)?;
    let delta_hypothesis_ok = delta < 1e-8_f64.min(1.0 / (64.0 * (m * m) as f64));

    Ok(LowerBoundReport {
        closed_form,
        per_rank,
        program_value: best_value,
        program_argmin: best_point,
        program_converged,
        dual_value,
        delta_hypothesis_ok,
        qualified_count: m,
    })
}

/// Minimum pulls of the rank-`arm_rank` arm that any sound strategy stopping
/// via the rank-`qualified_rank` arm must spend, given that rank's selection
/// weight `weight`. Constant-free floor from the change-of-measure
/// accounting; both ranks are 1-based against the descending-mean order.
pub fn forced_pull_floor(
    instance: &BanditInstance,
    qualified_rank: usize,
    arm_rank: usize,
    weight: f64,
) -> Result<u64, BoundsError> {
    let profile = require_positive(instance)?;
    let m = profile.qualified_count;
    if qualified_rank == 0 || qualified_rank > m {
        return Err(BoundsError::RankOutOfRange { rank: qualified_rank, qualified: m });
    }
    if arm_rank == 0 || arm_rank > profile.arm_count {
        return Err(BoundsError::ArmRankOutOfRange {
            rank: arm_rank,
            arm_count: profile.arm_count,
        });
    }
    if !(weight > 0.0 && weight <= 1.0) {
        return Err(BoundsError::BadWeight(weight));
    }
    let threshold_gap = profile.rank_gap_to_threshold(qualified_rank);
    let j_arm = profile.ranking[qualified_rank - 1];
    let a_arm = profile.ranking[arm_rank - 1];
    let between_gap = profile.gaps[j_arm + 1][a_arm + 1];
    let dominant = (threshold_gap * threshold_gap).max(between_gap * between_gap);
    if dominant == 0.0 {
        return Err(BoundsError::ZeroDenominator);
    }
    let floor = 1.0 / (200.0 * dominant * (1.0 + (1.0 / weight).ln()));
    Ok(floor.ceil() as u64)
}

/// Evaluates both guarantee formulas for `instance` at tolerance `delta`.
pub fn upper_bounds(instance: &BanditInstance, delta: f64) -> Result<UpperBoundReport, BoundsError> {
    validate_tolerance(delta)?;
    if instance.classify() == InstanceClass::Boundary {
        return Err(BoundsError::BoundaryInstance);
    }
    let profile = ComplexityProfile::of(instance);
    let k = profile.arm_count as f64;
    let log_k = k.ln();
    let log_inv_delta = (1.0 / delta).ln();

    let accept_per_rank: Vec<f64> = (1..=profile.qualified_count)
        .map(|j| {
            let gap = profile.rank_gap_to_threshold(j);
            let gap_sq = gap * gap;
            let tolerance_term = log_inv_delta / gap_sq;
            let structure_term =
                log_k.powi(3) * ((4.0 * k).ln() + (1.0 / gap_sq).log2()) * profile.rank_cost[j - 1];
            log_k * (tolerance_term + structure_term)
        })
        .collect();
    let accept = accept_per_rank
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);

    let reject_mass = profile.reject_all_cost;
    let reject = log_k * reject_mass * (reject_mass / delta).ln();

    Ok(UpperBoundReport { accept_per_rank, accept, reject, constants_omitted: true })
}
