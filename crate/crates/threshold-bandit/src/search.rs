//! The complete bracketed identification algorithm.
//!
//! One run shuffles the arms, builds the nested brackets, and drives one
//! [`PhasedSearch`] engine copy per bracket in round-robin (one step — one
//! fresh draw — per copy per round). Each copy gets an equal share of the
//! failure budget and its own independent reward stream. The first copy to
//! terminate decides the answer: a certified arm from any copy is trusted,
//! and a no-arm verdict can only come from the full bracket (smaller copies
//! never conclude it).
//!
//! Why this wins: a copy whose bracket happens to contain a qualified arm
//! but few distractors terminates quickly, and the round-robin means total
//! draws are at most `copies x (winning copy's rounds)` — the cost of
//! hedging over all bracket sizes is a logarithmic factor, not a sum.

use serde::Serialize;
use thiserror::Error;

use crate::brackets::{BracketError, BracketSet};
use crate::engine::{EngineError, FailReason, InstanceSampler, PhasedSearch, StepOutcome};
use crate::instance::{BanditInstance, InstanceClass, InstanceError};
use crate::rng::RngStream;

/// Default ceiling on total fresh draws per run.
pub const DEFAULT_SAFETY_CAP: u64 = 100_000_000;

/// Default exploration widening factor.
pub const DEFAULT_MULTIPLIER: f64 = 1.01;

/// Tunable parameters of a bracketed run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SearchParams {
    /// Overall failure budget `delta`, split evenly across bracket copies.
    pub tolerance: f64,
    /// Exploration widening factor `C` (strictly above 1).
    pub multiplier: f64,
    /// Hard ceiling on total fresh draws; exceeding it truncates the run
    /// (flagged, not an error).
    pub safety_cap: u64,
    /// Run the engines' expensive per-step validation.
    pub validate: bool,
}

impl SearchParams {
    /// Parameters with published defaults for a given tolerance.
    #[must_use]
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            multiplier: DEFAULT_MULTIPLIER,
            safety_cap: DEFAULT_SAFETY_CAP,
            validate: false,
        }
    }

    #[must_use]
    pub fn with_multiplier(mut self, multiplier: f64) -> Self {
        self.multiplier = multiplier;
        self
    }

    #[must_use]
    pub fn with_safety_cap(mut self, safety_cap: u64) -> Self {
        self.safety_cap = safety_cap;
        self
    }

    #[must_use]
    pub fn with_validation(mut self, validate: bool) -> Self {
        self.validate = validate;
        self
    }
}

/// Errors that abort a bracketed run outright.
#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("boundary instance: an arm mean equals the threshold exactly, no finite-sample guarantee exists")]
    BoundaryInstance,
    #[error("phase schedule overflow in bracket {bracket} at phase {phase}")]
    ScheduleOverflow { bracket: usize, phase: u32 },
    #[error(transparent)]
    Bracket(#[from] BracketError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Everything a finished (or truncated) bracketed run reports.
#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome {
    /// `Some(arm)` — certified at or above the threshold; `None` — the full
    /// bracket certified that no arm qualifies (or the run was truncated —
    /// check [`Self::truncated`]).
    pub answer: Option<usize>,
    /// Total fresh draws across all copies.
    pub total_draws: u64,
    /// 1-based number of the bracket whose copy terminated; `None` when
    /// truncated.
    pub winning_bracket: Option<usize>,
    /// Steps taken by the winning copy (its round count).
    pub winning_rounds: u64,
    /// Fresh draws per copy, indexed by bracket number - 1.
    pub per_copy_draws: Vec<u64>,
    /// Fresh draws per arm (global ids), summed over copies.
    pub per_arm_draws: Vec<u64>,
    /// The failure budget each copy ran with (`tolerance / copies`).
    pub copy_tolerance: f64,
    /// The shuffled arm order the brackets were built on.
    pub order: Vec<usize>,
    /// Bracket sizes, for reference.
    pub bracket_sizes: Vec<usize>,
    /// True when the safety cap stopped the run before any copy terminated.
    pub truncated: bool,
}

/// Runs the bracketed search on `instance` with the given deterministic
/// stream. Substream 0 shuffles the arms; substream `b` feeds bracket `b`'s
/// copy, so runs are reproducible draw-for-draw from the stream alone.
pub fn run_bracketed(
    instance: &BanditInstance,
    params: &SearchParams,
    stream: RngStream,
) -> Result<SearchOutcome, SearchError> {
    if instance.classify() == InstanceClass::Boundary {
        return Err(SearchError::BoundaryInstance);
    }
    let arm_count = instance.arm_count();
    let mut shuffle_rng = stream.substream(0).rng();
    let set = BracketSet::sample(arm_count, &mut shuffle_rng)?;
    let copies = set.count();
    let copy_tolerance = params.tolerance / copies as f64;

    let mut engines = Vec::with_capacity(copies);
    let mut sources = Vec::with_capacity(copies);
    for number in 1..=copies {
        let mut engine = PhasedSearch::new(
            set.bracket(number).to_vec(),
            instance.threshold(),
            copy_tolerance,
            params.multiplier,
            arm_count,
        )?;
        engine.set_validation(params.validate);
        engines.push(engine);
        sources.push(InstanceSampler::new(instance, stream.substream(number as u64).rng()));
    }

    let mut per_arm_draws = vec![0u64; arm_count];
    let mut winner: Option<(usize, Option<usize>)> = None;
    let mut truncated = false;
    let mut drawn_so_far: u64 = 0;

    'rounds: loop {
        for index in 0..copies {
            match engines[index].step(&mut sources[index])? {
                StepOutcome::Pulled { arm, .. } => {
                    per_arm_draws[arm] += 1;
                    drawn_so_far += 1;
                }
                StepOutcome::Terminated { answer } => {
                    // A certification step carries one final verification
                    // draw; a no-arm verdict draws nothing.
                    if let Some(arm) = answer {
                        per_arm_draws[arm] += 1;
                    }
                    winner = Some((index, answer));
                    break 'rounds;
                }
                StepOutcome::Failed { reason } => {
                    let FailReason::ScheduleOverflow { phase } = reason;
                    return Err(SearchError::ScheduleOverflow { bracket: index + 1, phase });
                }
            }
            if drawn_so_far >= params.safety_cap {
                truncated = true;
                break 'rounds;
            }
        }
    }

    let per_copy_draws: Vec<u64> = engines.iter().map(PhasedSearch::total_draws).collect();
    let total_draws: u64 = per_copy_draws.iter().sum();

    let (winning_bracket, winning_rounds, answer) = match winner {
        Some((index, answer)) => {
            let rounds = engines[index].steps_taken();
            check_round_robin_accounting(&engines, index, total_draws, &per_copy_draws);
            (Some(index + 1), rounds, answer)
        }
        None => (None, 0, None),
    };

    Ok(SearchOutcome {
        answer,
        total_draws,
        winning_bracket,
        winning_rounds,
        per_copy_draws,
        per_arm_draws,
        copy_tolerance,
        order: set.order().to_vec(),
        bracket_sizes: set.sizes().to_vec(),
        truncated,
    })
}

/// Round-robin cost relations, asserted on every completed run:
/// the winner decides total cost up to the copy count, because no copy can
/// be more than one step ahead of any other.
fn check_round_robin_accounting(
    engines: &[PhasedSearch],
    winner_index: usize,
    total_draws: u64,
    per_copy_draws: &[u64],
) {
    let copies = engines.len() as u64;
    let winner_steps = engines[winner_index].steps_taken();
    assert!(
        total_draws <= copies * winner_steps,
        "total draws {total_draws} exceed copies x winner rounds {copies} x {winner_steps}"
    );
    let min_copy_draws = per_copy_draws.iter().copied().min().unwrap_or(0);
    assert!(
        total_draws <= copies * (min_copy_draws + 1),
        "total draws {total_draws} exceed copies x (min copy draws + 1) = {copies} x {}",
        min_copy_draws + 1
    );
    for (index, engine) in engines.iter().enumerate() {
        let expected = if index <= winner_index { winner_steps } else { winner_steps - 1 };
        assert_eq!(
            engine.steps_taken(),
            expected,
            "copy {} fell out of round-robin lockstep",
            index + 1
        );
    }
}
