//! Per-bracket phased explore-exploit search.
//!
//! One [`PhasedSearch`] runs the identification routine on a fixed subset of
//! arms (a *bracket*), looking for a single arm whose mean clears the
//! threshold, or — when the bracket covers every arm — certifying that none
//! does. The search proceeds in phases `k = 1, 2, ...` with geometrically
//! shrinking tolerance `3^-k` and doubling exploration budgets, alternating
//! between two regimes:
//!
//! ```text
//! exploring    pull the arm with the highest exploration upper bound among
//!              arms still under the phase budget; when the *most recently
//!              appended* arm's widened lower bound reaches the threshold,
//!              promote it to candidate and switch to verification
//! exploiting   repeatedly pull the candidate; stop with that arm as soon as
//!              its (unwidened) lower bound strictly clears the threshold,
//!              or give up when the verification budget for the phase is
//!              spent and return to exploration at the next phase
//! ```
//!
//! Two details make the estimates well-behaved:
//!
//! * **Parked samples.** When a candidate is promoted, the single draw that
//!   triggered promotion is *parked* in a one-slot-per-arm container and
//!   removed from the exploration history. Promotion is a selection event —
//!   keeping that sample would bias the arm's running mean upward. The parked
//!   sample is returned to the history (not redrawn) the next time
//!   exploration selects that arm, so no data is discarded and each arm's
//!   exploration history is always an exact chronological *prefix* of its
//!   fresh draws.
//! * **Draw accounting.** The exploration round counter equals the total
//!   fresh exploration draws, which equals the history sizes plus parked
//!   samples. Every `step` performs exactly one fresh draw unless it
//!   terminates; parked-sample transfers and phase advances are free
//!   bookkeeping inside a step.
//!
//! The engine checks its own accounting after every step and its interval
//! invariants at every phase transition; with
//! [`PhasedSearch::set_validation`] it additionally replays each touched
//! arm's history prefix element-by-element. Violations panic: they indicate
//! an implementation bug, never bad luck with the noise.

use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::confidence::{
    self, exploitation_budget, exploration_budget, phase_params, BoundKind, ConfidenceError,
    MAX_PHASE,
};
use crate::instance::BanditInstance;

/// Where rewards come from. Production runs sample a [`BanditInstance`];
/// tests inject deterministic scripts.
pub trait RewardSource {
    /// Draws one reward for `arm` (global 0-based arm id).
    fn draw(&mut self, arm: usize) -> f64;
}

/// Samples a problem instance with a caller-owned generator.
pub struct InstanceSampler<'a, R: Rng> {
    instance: &'a BanditInstance,
    rng: R,
}

impl<'a, R: Rng> InstanceSampler<'a, R> {
    pub fn new(instance: &'a BanditInstance, rng: R) -> Self {
        Self { instance, rng }
    }
}

impl<R: Rng> RewardSource for InstanceSampler<'_, R> {
    fn draw(&mut self, arm: usize) -> f64 {
        self.instance.sample(arm, &mut self.rng).expect("arm id validated at construction")
    }
}

/// Fixed per-arm reward scripts; draws pop from the front. Panics when a
/// script runs dry — in a test that means the scenario is underspecified.
pub struct ScriptedRewards {
    queues: Vec<VecDeque<f64>>,
}

impl ScriptedRewards {
    #[must_use]
    pub fn new(per_arm: Vec<Vec<f64>>) -> Self {
        Self { queues: per_arm.into_iter().map(VecDeque::from).collect() }
    }
}

impl RewardSource for ScriptedRewards {
    fn draw(&mut self, arm: usize) -> f64 {
        self.queues
            .get_mut(arm)
            .and_then(VecDeque::pop_front)
            .unwrap_or_else(|| panic!("reward script exhausted for arm {arm}"))
    }
}

/// Endless constant rewards, one value per arm.
pub struct ConstantRewards {
    values: Vec<f64>,
}

impl ConstantRewards {
    #[must_use]
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl RewardSource for ConstantRewards {
    fn draw(&mut self, arm: usize) -> f64 {
        self.values[arm]
    }
}

/// Which regime the engine is in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// Pulling bracket arms to find a promotion-worthy candidate.
    Exploring,
    /// Verifying the current candidate against the threshold.
    Exploiting,
    /// Terminated (answer available) or failed; no further steps accepted.
    Done,
}

/// Result of one [`PhasedSearch::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    /// Exactly one fresh reward was drawn.
    Pulled {
        /// Global arm id that was pulled.
        arm: usize,
        /// Regime the draw belongs to ([`Mode::Exploring`] or [`Mode::Exploiting`]).
        mode: Mode,
        /// The observed reward.
        reward: f64,
    },
    /// The search concluded; no draw was necessarily made this step.
    Terminated {
        /// `Some(arm)` — this arm's mean is certified at or above the
        /// threshold; `None` — no arm in the (full) bracket qualifies.
        answer: Option<usize>,
    },
    /// The search cannot continue.
    Failed { reason: FailReason },
}

/// Unrecoverable conditions surfaced as [`StepOutcome::Failed`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FailReason {
    /// The phase index exceeded [`MAX_PHASE`].
    ScheduleOverflow { phase: u32 },
}

/// Errors from engine construction or low-level container operations.
#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("bracket must contain at least one arm")]
    EmptyBracket,
    #[error("bracket repeats arm {arm}")]
    DuplicateArm { arm: usize },
    #[error("bracket arm {arm} out of range for {total_arms} total arms")]
    ArmOutOfRange { arm: usize, total_arms: usize },
    #[error("tolerance must lie in (0, 1), got {0}")]
    BadTolerance(f64),
    #[error("widening factor must exceed 1, got {0}")]
    MultiplierTooSmall(f64),
    #[error("arm {arm} is not in this bracket")]
    NotInBracket { arm: usize },
    #[error("arm {arm} has no exploration draws to park")]
    NothingToPark { arm: usize },
    #[error("arm {arm} already has a parked sample")]
    ParkOccupied { arm: usize },
    #[error("arm {arm} has no parked sample")]
    NothingParked { arm: usize },
    #[error("the search already finished; inspect answer() instead of stepping")]
    AlreadyDone,
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
}

/// Reward history of one arm in one regime, with a fold-left running sum.
///
/// The sum is maintained incrementally on push and recomputed by a fresh
/// fold on pop, so `mean()` is always *bitwise* equal to the left fold of
/// the stored prefix — which is what lets validation compare replayed means
/// with `==` instead of a tolerance.
#[derive(Clone, Debug, Default, PartialEq)]
struct ArmHistory {
    rewards: Vec<f64>,
    sum: f64,
}

impl ArmHistory {
    fn push(&mut self, reward: f64) {
        self.rewards.push(reward);
        self.sum += reward;
    }

    fn pop(&mut self) -> Option<f64> {
        let reward = self.rewards.pop()?;
        self.sum = self.rewards.iter().sum();
        Some(reward)
    }

    fn len(&self) -> u64 {
        self.rewards.len() as u64
    }

    /// Empirical mean; 0 for an empty history (callers pair it with an
    /// infinite radius, so the value never matters).
    fn mean(&self) -> f64 {
        if self.rewards.is_empty() {
            0.0
        } else {
            self.sum / self.rewards.len() as f64
        }
    }
}

/// The per-bracket phased explore-exploit engine. See the module docs for
/// the control flow.
#[derive(Clone, Debug)]
pub struct PhasedSearch {
    // Static configuration.
    bracket: Vec<usize>,
    threshold: f64,
    tolerance: f64,
    multiplier: f64,
    total_arms: usize,
    validate: bool,

    // Dynamic state.
    phase: u32,
    mode: Mode,
    explore: Vec<ArmHistory>,
    verify: Vec<ArmHistory>,
    parked: Vec<Option<f64>>,
    /// Chronological fresh exploration draws per slot; never truncated.
    /// `explore[s]` must always equal a prefix of `fresh_log[s]`.
    fresh_log: Vec<Vec<f64>>,
    explore_rounds: u64,
    verify_rounds: u64,
    /// Slot whose exploration history most recently grew (fresh draw or
    /// parked-sample return); promotion checks apply to this slot only.
    last_appended: Option<usize>,
    candidate: Option<usize>,
    /// Verification draw count of the candidate at the moment the current
    /// phase began, for the per-phase increment invariant.
    verify_phase_baseline: u64,
    answer: Option<Option<usize>>,
    failure: Option<FailReason>,
    steps: u64,
}

impl PhasedSearch {
    /// Builds an engine over `bracket` (global 0-based arm ids, promotion
    /// tie-breaks follow this order) with overall failure budget `tolerance`,
    /// exploration widening factor `multiplier` (strictly above 1), and the
    /// *global* arm count `total_arms` used for per-arm confidence splits —
    /// the split stays global even for small brackets so that interval
    /// guarantees compose across brackets sharing the same instance.
    pub fn new(
        bracket: Vec<usize>,
        threshold: f64,
        tolerance: f64,
        multiplier: f64,
        total_arms: usize,
    ) -> Result<Self, EngineError> {
        if bracket.is_empty() {
            return Err(EngineError::EmptyBracket);
        }
        let mut seen = vec![false; total_arms];
        for &arm in &bracket {
            if arm >= total_arms {
                return Err(EngineError::ArmOutOfRange { arm, total_arms });
            }
            if seen[arm] {
                return Err(EngineError::DuplicateArm { arm });
            }
            seen[arm] = true;
        }
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(EngineError::BadTolerance(tolerance));
        }
        if multiplier <= 1.0 {
            return Err(EngineError::MultiplierTooSmall(multiplier));
        }
        let slots = bracket.len();
        Ok(Self {
            bracket,
            threshold,
            tolerance,
            multiplier,
            total_arms,
            validate: false,
            phase: 1,
            mode: Mode::Exploring,
            explore: vec![ArmHistory::default(); slots],
            verify: vec![ArmHistory::default(); slots],
            parked: vec![None; slots],
            fresh_log: vec![Vec::new(); slots],
            explore_rounds: 0,
            verify_rounds: 0,
            last_appended: None,
            candidate: None,
            verify_phase_baseline: 0,
            answer: None,
            failure: None,
            steps: 0,
        })
    }

    /// Enables or disables the expensive per-step prefix replay check.
    pub fn set_validation(&mut self, on: bool) {
        self.validate = on;
    }

    // ------------------------------------------------------------------
    // Introspection
    // ------------------------------------------------------------------

    #[must_use]
    pub fn bracket(&self) -> &[usize] {
        &self.bracket
    }

    #[must_use]
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Current phase index (starts at 1).
    #[must_use]
    pub fn phase(&self) -> u32 {
        self.phase
    }

    /// Total fresh exploration draws so far.
    #[must_use]
    pub fn exploration_rounds(&self) -> u64 {
        self.explore_rounds
    }

    /// Total verification draws so far.
    #[must_use]
    pub fn verification_rounds(&self) -> u64 {
        self.verify_rounds
    }

    /// All fresh draws charged to this engine.
    #[must_use]
    pub fn total_draws(&self) -> u64 {
        self.explore_rounds + self.verify_rounds
    }

    /// Steps taken (calls to [`Self::step`] that returned `Ok`).
    #[must_use]
    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Exploration history size of `arm` (excludes a parked sample).
    pub fn exploration_draw_count(&self, arm: usize) -> Result<u64, EngineError> {
        Ok(self.explore[self.slot_of(arm)?].len())
    }

    /// Verification history size of `arm`.
    pub fn verification_draw_count(&self, arm: usize) -> Result<u64, EngineError> {
        Ok(self.verify[self.slot_of(arm)?].len())
    }

    /// The parked sample of `arm`, if any.
    pub fn parked_sample(&self, arm: usize) -> Result<Option<f64>, EngineError> {
        Ok(self.parked[self.slot_of(arm)?])
    }

    /// Current candidate arm (set at the most recent promotion).
    #[must_use]
    pub fn candidate(&self) -> Option<usize> {
        self.candidate.map(|slot| self.bracket[slot])
    }

    /// Final answer once the engine is done: `Some(Some(arm))` certified,
    /// `Some(None)` no-arm verdict, `None` still running or failed.
    #[must_use]
    pub fn answer(&self) -> Option<Option<usize>> {
        self.answer
    }

    /// Failure reason, if the engine gave up.
    #[must_use]
    pub fn failure(&self) -> Option<FailReason> {
        self.failure
    }

    /// Exploration confidence interval of `arm` at the current phase
    /// tolerance (lower bound carries the widening factor).
    pub fn exploration_interval(&self, arm: usize) -> Result<(f64, f64), EngineError> {
        let slot = self.slot_of(arm)?;
        Ok((self.explore_lower(slot), self.explore_upper(slot)))
    }

    /// Verification confidence interval of `arm` at the current phase's
    /// confidence split.
    pub fn verification_interval(&self, arm: usize) -> Result<(f64, f64), EngineError> {
        let slot = self.slot_of(arm)?;
        let delta = self.verify_per_arm_tolerance();
        let history = &self.verify[slot];
        let upper =
            confidence::bound(BoundKind::ExploitationUpper, history.mean(), history.len(), delta, self.multiplier)?;
        let lower =
            confidence::bound(BoundKind::ExploitationLower, history.mean(), history.len(), delta, self.multiplier)?;
        Ok((lower, upper))
    }

    // ------------------------------------------------------------------
    // Low-level parked-sample container operations
    // ------------------------------------------------------------------

    /// Moves `arm`'s most recent exploration draw into the parked slot.
    /// Exact inverse of [`Self::unpark`].
    pub fn park_most_recent(&mut self, arm: usize) -> Result<(), EngineError> {
        let slot = self.slot_of(arm)?;
        if self.parked[slot].is_some() {
            return Err(EngineError::ParkOccupied { arm });
        }
        let reward = self.explore[slot].pop().ok_or(EngineError::NothingToPark { arm })?;
        self.parked[slot] = Some(reward);
        Ok(())
    }

    /// Returns `arm`'s parked sample to its exploration history. Exact
    /// inverse of [`Self::park_most_recent`].
    pub fn unpark(&mut self, arm: usize) -> Result<(), EngineError> {
        let slot = self.slot_of(arm)?;
        let reward = self.parked[slot].take().ok_or(EngineError::NothingParked { arm })?;
        self.explore[slot].push(reward);
        Ok(())
    }

    /// The arm exploration would pull next: highest exploration upper bound
    /// among arms still under the phase budget, ties to the earliest bracket
    /// position. `None` when every arm has exhausted its budget.
    #[must_use]
    pub fn select_exploration_arm(&self) -> Option<usize> {
        let budget = self.exploration_budget_now();
        let mut best: Option<(usize, f64)> = None;
        for slot in 0..self.bracket.len() {
            if self.explore[slot].len() as f64 > budget - 1.0 {
                continue; // over budget for this phase
            }
            let upper = self.explore_upper(slot);
            let better = match best {
                None => true,
                Some((_, incumbent)) => upper > incumbent,
            };
            if better {
                best = Some((slot, upper));
            }
        }
        best.map(|(slot, _)| self.bracket[slot])
    }

    // ------------------------------------------------------------------
    // Stepping
    // ------------------------------------------------------------------

    /// Advances the search by exactly one fresh draw (or terminates).
    /// Parked-sample transfers and phase advances happen transparently
    /// inside the step.
    pub fn step(&mut self, source: &mut impl RewardSource) -> Result<StepOutcome, EngineError> {
        if self.mode == Mode::Done {
            return Err(EngineError::AlreadyDone);
        }
        let outcome = if self.mode == Mode::Exploiting {
            self.exploit_step(source)
        } else {
            self.explore_step(source)
        };
        if outcome.is_ok() {
            self.steps += 1;
            self.check_accounting();
        }
        outcome
    }

    fn explore_step(&mut self, source: &mut impl RewardSource) -> Result<StepOutcome, EngineError> {
        // One step performs at most |bracket| parked transfers (each empties
        // a slot that cannot refill without leaving exploration) plus at
        // most MAX_PHASE phase advances; anything past that is a bug.
        let iteration_guard = 2 * (self.bracket.len() + MAX_PHASE as usize) + 16;
        for _ in 0..iteration_guard {
            // (1) Promotion: the most recently appended arm has pulled its
            // widened lower bound up to the threshold.
            if let Some(slot) = self.last_appended {
                if self.explore[slot].len() >= 1 && self.explore_lower(slot) >= self.threshold {
                    self.park_most_recent(self.bracket[slot]).expect(
                        "promotion invariant: the triggering sample exists and its parked slot \
                         is free (older prefixes were already checked below the threshold)",
                    );
                    self.candidate = Some(slot);
                    self.mode = Mode::Exploiting;
                    self.verify_phase_baseline = self.verify[slot].len();
                    let budget = self.exploitation_budget_now();
                    assert!(
                        (self.verify[slot].len() as f64) <= budget - 1.0,
                        "verification entry must start under the phase budget \
                         (count {}, budget {budget})",
                        self.verify[slot].len(),
                    );
                    return self.exploit_step(source);
                }
            }

            // (2) Every arm looks dead at this tolerance: either conclude
            // (full bracket, tolerance spent) or tighten and retry.
            let all_upper_below = (0..self.bracket.len())
                .all(|slot| self.explore_upper(slot) <= self.threshold);
            if all_upper_below {
                let phase_tolerance = phase_params(self.phase)?.tolerance;
                if phase_tolerance <= self.tolerance / 3.0
                    && self.bracket.len() == self.total_arms
                {
                    self.mode = Mode::Done;
                    self.answer = Some(None);
                    return Ok(StepOutcome::Terminated { answer: None });
                }
                if let Some(fail) = self.advance_phase()? {
                    return Ok(fail);
                }
                continue;
            }

            // (3) Budgets exhausted: move to the next phase.
            let budget = self.exploration_budget_now();
            let all_over_budget = (0..self.bracket.len())
                .all(|slot| self.explore[slot].len() as f64 > budget - 1.0);
            if all_over_budget {
                if let Some(fail) = self.advance_phase()? {
                    return Ok(fail);
                }
                continue;
            }

            // (4) Pull the most optimistic in-budget arm, consuming its
            // parked sample first if one is waiting.
            let arm = self
                .select_exploration_arm()
                .expect("an in-budget arm exists because (3) did not trigger");
            let slot = self.slot_of(arm).expect("selected arm is in the bracket");
            if self.parked[slot].is_some() {
                self.unpark(arm).expect("parked sample present");
                self.last_appended = Some(slot);
                self.validate_prefix(slot);
                continue; // a transfer is not a draw; rerun the checks
            }
            let reward = source.draw(arm);
            self.explore[slot].push(reward);
            self.fresh_log[slot].push(reward);
            self.explore_rounds += 1;
            self.last_appended = Some(slot);
            self.validate_prefix(slot);
            return Ok(StepOutcome::Pulled { arm, mode: Mode::Exploring, reward });
        }
        unreachable!("exploration step exceeded its internal iteration guard");
    }

    fn exploit_step(&mut self, source: &mut impl RewardSource) -> Result<StepOutcome, EngineError> {
        let slot = self.candidate.expect("exploiting mode always has a candidate");
        let arm = self.bracket[slot];

        let reward = source.draw(arm);
        self.verify[slot].push(reward);
        self.verify_rounds += 1;

        let delta = self.verify_per_arm_tolerance();
        let history = &self.verify[slot];
        let lower = confidence::bound(
            BoundKind::ExploitationLower,
            history.mean(),
            history.len(),
            delta,
            self.multiplier,
        )?;
        if lower > self.threshold {
            self.mode = Mode::Done;
            self.answer = Some(Some(arm));
            return Ok(StepOutcome::Terminated { answer: Some(arm) });
        }

        let budget = self.exploitation_budget_now();
        if self.verify[slot].len() as f64 > budget - 1.0 {
            // Verification budget spent without certifying: per-phase
            // increment must not exceed the budget it was given.
            let increment = self.verify[slot].len() - self.verify_phase_baseline;
            assert!(
                increment as f64 <= budget.ceil(),
                "verification increment {increment} exceeded its phase budget {budget}"
            );
            if let Some(fail) = self.advance_phase()? {
                return Ok(fail);
            }
            self.mode = Mode::Exploring;
        }
        Ok(StepOutcome::Pulled { arm, mode: Mode::Exploiting, reward })
    }

    /// Moves to the next phase, checking the phase-entry invariant. Returns
    /// `Some(Failed)` on schedule overflow.
    fn advance_phase(&mut self) -> Result<Option<StepOutcome>, EngineError> {
        // Budget invariant of the phase being closed: exploration never
        // exceeds the budget that admitted the draw.
        let closing_budget = self.exploration_budget_now();
        for slot in 0..self.bracket.len() {
            assert!(
                self.explore[slot].len() as f64 <= closing_budget,
                "arm {} ended the phase with {} exploration draws, budget {closing_budget}",
                self.bracket[slot],
                self.explore[slot].len(),
            );
        }

        if self.phase >= MAX_PHASE {
            let reason = FailReason::ScheduleOverflow { phase: self.phase + 1 };
            self.mode = Mode::Done;
            self.failure = Some(reason);
            return Ok(Some(StepOutcome::Failed { reason }));
        }
        self.phase += 1;
        if let Some(slot) = self.candidate {
            self.verify_phase_baseline = self.verify[slot].len();
        }

        // Phase-entry invariant: no arm may *start* a phase already looking
        // promotable — every stored prefix was checked below the threshold
        // when it formed, and shrinking the tolerance only lowers the bound.
        for slot in 0..self.bracket.len() {
            let lower = self.explore_lower(slot);
            assert!(
                lower < self.threshold,
                "arm {} entered phase {} with widened lower bound {lower} >= threshold {}",
                self.bracket[slot],
                self.phase,
                self.threshold,
            );
        }
        Ok(None)
    }

    // ------------------------------------------------------------------
    // Internal helpers
    // ------------------------------------------------------------------

    fn slot_of(&self, arm: usize) -> Result<usize, EngineError> {
        self.bracket
            .iter()
            .position(|&a| a == arm)
            .ok_or(EngineError::NotInBracket { arm })
    }

    /// Per-arm exploration tolerance at the current phase: `3^-k / K`.
    fn explore_per_arm_tolerance(&self) -> f64 {
        let params = phase_params(self.phase).expect("phase is validated on advance");
        params.tolerance / self.total_arms as f64
    }

    /// Per-arm verification tolerance at the current phase:
    /// `(tolerance / 5^k) / K`.
    fn verify_per_arm_tolerance(&self) -> f64 {
        let params = phase_params(self.phase).expect("phase is validated on advance");
        (self.tolerance / params.split) / self.total_arms as f64
    }

    fn explore_upper(&self, slot: usize) -> f64 {
        let history = &self.explore[slot];
        confidence::bound(
            BoundKind::ExplorationUpper,
            history.mean(),
            history.len(),
            self.explore_per_arm_tolerance(),
            self.multiplier,
        )
        .expect("tolerances validated at construction")
    }

    fn explore_lower(&self, slot: usize) -> f64 {
        let history = &self.explore[slot];
        confidence::bound(
            BoundKind::ExplorationLower,
            history.mean(),
            history.len(),
            self.explore_per_arm_tolerance(),
            self.multiplier,
        )
        .expect("tolerances validated at construction")
    }

    fn exploration_budget_now(&self) -> f64 {
        exploration_budget(self.phase, self.total_arms, self.multiplier)
            .expect("phase and multiplier validated")
    }

    fn exploitation_budget_now(&self) -> f64 {
        exploitation_budget(self.phase, self.total_arms, self.tolerance, self.multiplier)
            .expect("phase, tolerance and multiplier validated")
    }

    /// Cheap accounting invariants, checked after every successful step:
    /// the round counter equals history mass plus parked mass, and parked
    /// samples only exist for bracket arms (one slot each, by construction).
    fn check_accounting(&self) {
        let history_mass: u64 = self.explore.iter().map(ArmHistory::len).sum();
        let parked_mass = self.parked.iter().flatten().count() as u64;
        assert_eq!(
            self.explore_rounds,
            history_mass + parked_mass,
            "exploration rounds must equal stored plus parked samples"
        );
        let verify_mass: u64 = self.verify.iter().map(ArmHistory::len).sum();
        assert_eq!(self.verify_rounds, verify_mass, "verification rounds must equal stored samples");
    }

    /// Expensive validation (opt-in): the exploration history of `slot` is
    /// bitwise the chronological prefix of its fresh draws, including the
    /// fold-left running mean.
    fn validate_prefix(&self, slot: usize) {
        if !self.validate {
            return;
        }
        let history = &self.explore[slot];
        let prefix = &self.fresh_log[slot][..history.rewards.len()];
        assert_eq!(
            history.rewards, prefix,
            "exploration history of arm {} is not a prefix of its fresh draws",
            self.bracket[slot]
        );
        let folded: f64 = prefix.iter().sum();
        assert_eq!(
            history.sum.to_bits(),
            folded.to_bits(),
            "running sum of arm {} drifted from the fold-left prefix sum",
            self.bracket[slot]
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(
        bracket: Vec<usize>,
        threshold: f64,
        tolerance: f64,
        multiplier: f64,
        total_arms: usize,
    ) -> PhasedSearch {
        let mut e = PhasedSearch::new(bracket, threshold, tolerance, multiplier, total_arms)
            .expect("valid engine");
        e.set_validation(true);
        e
    }

    #[test]
    fn construction_contract() {
        let fresh = PhasedSearch::new(vec![3], 0.5, 0.05, 1.01, 8).unwrap();
        assert_eq!(fresh.exploration_rounds(), 0);
        assert_eq!(fresh.phase(), 1);
        assert_eq!(fresh.mode(), Mode::Exploring);
        let (lower, upper) = fresh.exploration_interval(3).unwrap();
        assert!(upper.is_infinite() && upper > 0.0, "undrawn arm starts fully unknown");
        assert!(lower.is_infinite() && lower < 0.0);

        assert_eq!(
            PhasedSearch::new(vec![], 0.5, 0.05, 1.01, 8).unwrap_err(),
            EngineError::EmptyBracket
        );
        assert_eq!(
            PhasedSearch::new(vec![2, 2], 0.5, 0.05, 1.01, 8).unwrap_err(),
            EngineError::DuplicateArm { arm: 2 }
        );
        assert_eq!(
            PhasedSearch::new(vec![8], 0.5, 0.05, 1.01, 8).unwrap_err(),
            EngineError::ArmOutOfRange { arm: 8, total_arms: 8 }
        );
        assert_eq!(
            PhasedSearch::new(vec![0], 0.5, 0.05, 1.0, 8).unwrap_err(),
            EngineError::MultiplierTooSmall(1.0)
        );
        assert_eq!(
            PhasedSearch::new(vec![0], 0.5, 0.0, 1.01, 8).unwrap_err(),
            EngineError::BadTolerance(0.0)
        );
    }

    #[test]
    fn first_step_pulls_the_first_bracket_arm() {
        let mut e = engine(vec![1, 0], 0.5, 0.1, 1.01, 2);
        assert_eq!(
            e.select_exploration_arm(),
            Some(1),
            "all-infinite upper bounds tie-break to bracket order"
        );
        let mut source = ScriptedRewards::new(vec![vec![], vec![0.4]]);
        let outcome = e.step(&mut source).unwrap();
        assert_eq!(outcome, StepOutcome::Pulled { arm: 1, mode: Mode::Exploring, reward: 0.4 });
        assert_eq!(e.exploration_rounds(), 1);
        assert_eq!(e.select_exploration_arm(), Some(0), "undrawn arm is now the most optimistic");
    }

    #[test]
    fn promotion_parks_the_triggering_sample_and_switches_regime() {
        // Single-arm bracket, enormous rewards: the second step must promote
        // on its loop-top check, park the first draw, and spend its fresh
        // draw on verification. A scripted low verification reward keeps the
        // engine from terminating immediately.
        let mut e = engine(vec![0], 0.0, 0.1, 2.0, 1);
        let mut source = ScriptedRewards::new(vec![vec![100.0, -100.0]]);

        let first = e.step(&mut source).unwrap();
        assert_eq!(first, StepOutcome::Pulled { arm: 0, mode: Mode::Exploring, reward: 100.0 });
        assert_eq!(e.mode(), Mode::Exploring);

        let second = e.step(&mut source).unwrap();
        assert_eq!(second, StepOutcome::Pulled { arm: 0, mode: Mode::Exploiting, reward: -100.0 });
        assert_eq!(e.mode(), Mode::Exploiting);
        assert_eq!(e.candidate(), Some(0));
        assert_eq!(e.parked_sample(0).unwrap(), Some(100.0), "promotion draw is parked");
        assert_eq!(e.exploration_draw_count(0).unwrap(), 0, "history gave up the parked draw");
        assert_eq!(e.exploration_rounds(), 1, "parked sample still counts as a round");
        assert_eq!(e.verification_draw_count(0).unwrap(), 1);
    }

    #[test]
    fn certification_terminates_with_the_candidate() {
        // Same setup, but the verification draw is also huge, so the
        // unwidened lower bound clears the threshold at once.
        let mut e = engine(vec![0], 0.0, 0.1, 2.0, 1);
        let mut source = ScriptedRewards::new(vec![vec![100.0, 100.0]]);
        e.step(&mut source).unwrap();
        let outcome = e.step(&mut source).unwrap();
        assert_eq!(outcome, StepOutcome::Terminated { answer: Some(0) });
        assert_eq!(e.mode(), Mode::Done);
        assert_eq!(e.answer(), Some(Some(0)));
        assert_eq!(e.step(&mut source).unwrap_err(), EngineError::AlreadyDone);
    }

    #[test]
    fn hopeless_full_bracket_concludes_none_without_a_final_draw() {
        // Two arms, rewards far below the threshold: once both upper bounds
        // sink under it and the phase tolerance has dropped to a third of
        // the overall budget, the engine concludes inside the step without
        // spending another draw.
        let mut e = engine(vec![0, 1], 0.0, 0.9, 1.01, 2);
        let mut source = ConstantRewards::new(vec![-10.0, -10.0]);

        let mut rounds_before = 0;
        loop {
            let rounds = e.exploration_rounds();
            match e.step(&mut source).unwrap() {
                StepOutcome::Pulled { mode, .. } => {
                    assert_eq!(mode, Mode::Exploring, "nothing here is promotable");
                    rounds_before = e.exploration_rounds();
                }
                StepOutcome::Terminated { answer } => {
                    assert_eq!(answer, None);
                    assert_eq!(
                        e.exploration_rounds(),
                        rounds,
                        "the concluding step must not draw"
                    );
                    assert_eq!(e.exploration_rounds(), rounds_before);
                    break;
                }
                StepOutcome::Failed { reason } => panic!("unexpected failure: {reason:?}"),
            }
            assert!(e.steps_taken() < 100, "conclusion should arrive within a few draws");
        }
        assert!(e.phase() >= 2, "tolerance gate postpones the verdict past phase 1");
    }

    #[test]
    fn partial_bracket_never_concludes_none() {
        // Hopeless rewards but the bracket covers only one of two arms: the
        // engine must keep tightening phases instead of answering.
        let mut e = engine(vec![0], 0.0, 0.9, 1.01, 2);
        let mut source = ConstantRewards::new(vec![-0.5, -0.5]);
        for _ in 0..200 {
            match e.step(&mut source).unwrap() {
                StepOutcome::Terminated { .. } => panic!("partial bracket may not conclude"),
                StepOutcome::Failed { .. } => panic!("schedule cannot overflow this quickly"),
                StepOutcome::Pulled { .. } => {}
            }
        }
        assert!(e.phase() > 1, "budget exhaustion must advance phases");
    }

    #[test]
    fn parked_sample_is_consumed_before_fresh_draws() {
        // Park a sample by hand, then let the engine select that arm: the
        // step must return the parked sample to the history first and only
        // then spend its fresh draw, all inside one step.
        let mut e = engine(vec![0, 1], 0.9, 0.1, 1.5, 2);
        let mut source =
            ScriptedRewards::new(vec![vec![0.45, 0.45, 0.62], vec![0.1, 0.1]]);
        for _ in 0..4 {
            // Interleaved warm-up: two draws per arm, nothing promotable.
            e.step(&mut source).unwrap();
        }
        assert_eq!(e.exploration_draw_count(0).unwrap(), 2);

        e.park_most_recent(0).unwrap();
        assert_eq!(e.exploration_draw_count(0).unwrap(), 1);
        assert_eq!(e.exploration_rounds(), 4, "parking does not unmake the draw");
        // Arm 0's rewards dominate arm 1's, counts are equal, so arm 0 is
        // the next selection despite holding a parked sample.
        assert_eq!(e.select_exploration_arm(), Some(0));

        let outcome = e.step(&mut source).unwrap();
        assert_eq!(outcome, StepOutcome::Pulled { arm: 0, mode: Mode::Exploring, reward: 0.62 });
        assert_eq!(e.parked_sample(0).unwrap(), None, "parked sample was consumed");
        assert_eq!(
            e.exploration_draw_count(0).unwrap(),
            3,
            "history regained the parked sample and gained the fresh draw"
        );
        assert_eq!(e.exploration_rounds(), 5, "the step cost exactly one fresh draw");
    }

    #[test]
    fn park_and_unpark_are_exact_inverses() {
        let mut e = engine(vec![0, 1], 0.5, 0.1, 1.5, 2);
        let mut source = ScriptedRewards::new(vec![vec![0.25, 0.75], vec![0.5, 0.45]]);
        for _ in 0..4 {
            e.step(&mut source).unwrap();
        }
        let draws_before = e.exploration_draw_count(0).unwrap();
        let interval_before = e.exploration_interval(0).unwrap();

        e.park_most_recent(0).unwrap();
        assert_eq!(e.exploration_draw_count(0).unwrap(), draws_before - 1);
        assert_eq!(
            e.park_most_recent(0).unwrap_err(),
            EngineError::ParkOccupied { arm: 0 },
            "one parked slot per arm"
        );
        e.unpark(0).unwrap();
        assert_eq!(e.exploration_draw_count(0).unwrap(), draws_before);
        assert_eq!(e.exploration_interval(0).unwrap(), interval_before, "state fully restored");
        assert_eq!(e.unpark(0).unwrap_err(), EngineError::NothingParked { arm: 0 });
    }

    #[test]
    fn parking_without_draws_is_an_error() {
        let mut e = engine(vec![0], 0.5, 0.1, 1.5, 1);
        assert_eq!(e.park_most_recent(0).unwrap_err(), EngineError::NothingToPark { arm: 0 });
        assert_eq!(e.park_most_recent(1).unwrap_err(), EngineError::NotInBracket { arm: 1 });
    }

    #[test]
    fn over_budget_arms_are_excluded_from_selection() {
        let mut e = engine(vec![0, 1], 0.5, 0.1, 1.01, 2);
        let mut source = ConstantRewards::new(vec![0.2, 0.2]);
        // Pull until the first phase budget binds for at least one arm, then
        // confirm selection never names an over-budget arm.
        for _ in 0..400 {
            let phase_before = e.phase();
            let budget = exploration_budget(phase_before, 2, 1.01).unwrap();
            if let Some(arm) = e.select_exploration_arm() {
                let count = e.exploration_draw_count(arm).unwrap();
                assert!(
                    count as f64 <= budget - 1.0,
                    "selected arm {arm} with {count} draws exceeds budget {budget}"
                );
            }
            match e.step(&mut source).unwrap() {
                StepOutcome::Pulled { .. } => {}
                other => panic!("unexpected outcome {other:?}"),
            }
        }
        assert!(e.phase() > 1, "two low arms must eventually exhaust phase budgets");
    }

    #[test]
    fn prefix_mean_survives_promotion_cycles() {
        // Run a full promote-fail-refill cycle with validation enabled; the
        // per-step prefix replay inside the engine does the heavy checking.
        let mut e = engine(vec![0, 1], 0.3, 0.5, 1.5, 2);
        let mut source = ConstantRewards::new(vec![0.9, -0.5]);
        let mut terminated = false;
        for _ in 0..10_000 {
            match e.step(&mut source).unwrap() {
                StepOutcome::Terminated { answer } => {
                    assert_eq!(answer, Some(0));
                    terminated = true;
                    break;
                }
                StepOutcome::Failed { reason } => panic!("unexpected failure {reason:?}"),
                StepOutcome::Pulled { .. } => {}
            }
        }
        assert!(terminated, "a clearly qualified arm must be certified");
    }
}
