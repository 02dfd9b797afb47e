//! Randomized structural properties: statements that must hold for *every*
//! valid input, exercised over generated instances and parameters. These
//! complement the unit tests (which pin exact values) and the acceptance
//! suite (which measures statistical behavior at scale).

use proptest::prelude::*;
use rand::seq::SliceRandom;

use threshold_bandit::bounds::{dual_feasible_value, ProgramObjective};
use threshold_bandit::brackets::{bracket_count, bracket_sizes, BracketSet};
use threshold_bandit::complexity::ComplexityProfile;
use threshold_bandit::confidence::{
    deviation_envelope, exploitation_budget, exploration_budget, radius, sufficient_sample_size,
};
use threshold_bandit::instance::BanditInstance;
use threshold_bandit::rng::RngStream;
use threshold_bandit::search::{run_bracketed, SearchParams};
use threshold_bandit::sim::wilson_interval;

/// Relative closeness for values that are recomputed in a different
/// floating-point summation order.
fn close(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Means with all pairwise gaps and all threshold gaps bounded away from
/// zero, so rankings are unambiguous and no cost degenerates.
fn separated_means(
    count: std::ops::RangeInclusive<usize>,
    threshold: f64,
) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, count).prop_filter(
        "means must be pairwise separated and off the threshold",
        move |means| {
            let off_threshold = means.iter().all(|m| (m - threshold).abs() > 1e-3);
            let separated = means
                .iter()
                .enumerate()
                .all(|(i, a)| means[..i].iter().all(|b| (a - b).abs() > 1e-3));
            off_threshold && separated
        },
    )
}

/// A positive instance (at least one arm above the threshold).
fn positive_instance() -> impl Strategy<Value = BanditInstance> {
    separated_means(2..=6, 0.5)
        .prop_filter("needs a qualified arm", |means| means.iter().any(|&m| m > 0.5 + 1e-3))
        .prop_map(|means| BanditInstance::gaussian(means, 0.5).expect("valid fixture"))
}

/// Weights summing to exactly one half: a point on the feasible slice of the
/// selection-weight program.
fn slice_point(dim: usize, raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw[..dim].iter().sum();
    raw[..dim].iter().map(|u| 0.5 * u / total).collect()
}

proptest! {
    // -----------------------------------------------------------------
    // Instance geometry
    // -----------------------------------------------------------------

    #[test]
    fn gap_is_a_metric_over_extended_indices(
        means in prop::collection::vec(0.0..=1.0f64, 1..=6),
        threshold in 0.0..=1.0f64,
        picks in prop::collection::vec(0usize..7, 3),
    ) {
        let instance = BanditInstance::gaussian(means.clone(), threshold).unwrap();
        let k = means.len();
        let (i, j, l) = (picks[0] % (k + 1), picks[1] % (k + 1), picks[2] % (k + 1));
        let gap = |a: usize, b: usize| instance.gap(a, b).unwrap();
        prop_assert_eq!(gap(i, i), 0.0);
        prop_assert_eq!(gap(i, j), gap(j, i));
        prop_assert!(gap(i, l) <= gap(i, j) + gap(j, l) + 1e-12);
    }

    #[test]
    fn complexity_profile_is_permutation_invariant(
        means in separated_means(2..=6, 0.5),
        perm_seed in any::<u64>(),
    ) {
        let original = BanditInstance::gaussian(means.clone(), 0.5).unwrap();
        let base = ComplexityProfile::of(&original);

        let mut perm: Vec<usize> = (0..means.len()).collect();
        perm.shuffle(&mut RngStream::new(perm_seed).rng());
        let permuted_means: Vec<f64> = perm.iter().map(|&i| means[i]).collect();
        let permuted = BanditInstance::gaussian(permuted_means, 0.5).unwrap();
        let other = ComplexityProfile::of(&permuted);

        // Scalar measures ignore arm order entirely.
        prop_assert_eq!(base.qualified_count, other.qualified_count);
        prop_assert_eq!(base.min_qualified_gap, other.min_qualified_gap);
        prop_assert!(close(base.reject_all_cost, other.reject_all_cost));
        prop_assert!(close(base.below_vs_best_cost, other.below_vs_best_cost));
        prop_assert_eq!(base.best_vs_threshold_cost, other.best_vs_threshold_cost);
        prop_assert!(close(base.best_vs_rest_cost, other.best_vs_rest_cost));
        prop_assert!(close(base.accept_side_cost, other.accept_side_cost));
        prop_assert!(close(base.uniform_sampling_cost, other.uniform_sampling_cost));
        prop_assert_eq!(base.rank_cost.len(), other.rank_cost.len());
        for (a, b) in base.rank_cost.iter().zip(&other.rank_cost) {
            prop_assert!(close(*a, *b));
        }

        // The ranking follows the arms through the permutation: new arm `j`
        // is old arm `perm[j]`.
        let mut position_of_old = vec![0usize; means.len()];
        for (new_index, &old_index) in perm.iter().enumerate() {
            position_of_old[old_index] = new_index;
        }
        let mapped: Vec<usize> = base.ranking.iter().map(|&arm| position_of_old[arm]).collect();
        prop_assert_eq!(mapped, other.ranking.clone());
    }

    // -----------------------------------------------------------------
    // Confidence machinery
    // -----------------------------------------------------------------

    #[test]
    fn radius_shrinks_when_draws_double(
        t in 1u64..(1 << 50),
        delta in 1e-9..=0.5f64,
    ) {
        // Established separately: doubling monotonicity can genuinely fail
        // for tolerances above one half, so the hypothesis stops there.
        prop_assert!(radius(2 * t, delta).unwrap() <= radius(t, delta).unwrap() + 1e-12);
    }

    #[test]
    fn radius_widens_as_the_tolerance_shrinks(
        t in 1u64..(1 << 50),
        lo in 1e-9..=0.9f64,
        scale in 1.0..=100.0f64,
    ) {
        let hi = (lo * scale).min(0.999_999);
        prop_assert!(radius(t, lo).unwrap() >= radius(t, hi).unwrap() - 1e-12);
    }

    #[test]
    fn phase_budgets_grow_with_the_phase_index(
        k in 1u32..=59,
        arm_count in 2usize..=64,
        delta in 1e-6..=0.5f64,
        multiplier in 1.01..=3.0f64,
    ) {
        prop_assert!(
            exploration_budget(k + 1, arm_count, multiplier).unwrap()
                > exploration_budget(k, arm_count, multiplier).unwrap()
        );
        prop_assert!(
            exploitation_budget(k + 1, arm_count, delta, multiplier).unwrap()
                > exploitation_budget(k, arm_count, delta, multiplier).unwrap()
        );
    }

    #[test]
    fn sufficient_draw_counts_force_the_envelope_under_the_gap(
        gap in 0.01..=1.0f64,
        arm_count in 2usize..=64,
        delta in 1e-4..=0.5f64,
        multiplier in 1.0..=3.0f64,
        factor in 1.01..=100.0f64,
    ) {
        let threshold = sufficient_sample_size(gap, arm_count, delta, multiplier).unwrap();
        let t = (threshold * factor).ceil() as u64 + 1;
        prop_assert!(deviation_envelope(t, arm_count, delta, multiplier) < gap);
    }

    // -----------------------------------------------------------------
    // Brackets
    // -----------------------------------------------------------------

    #[test]
    fn bracket_sizes_are_nested_dyadic_prefixes(arm_count in 2usize..=1024) {
        let sizes = bracket_sizes(arm_count).unwrap();
        prop_assert_eq!(sizes.len(), bracket_count(arm_count).unwrap());
        prop_assert_eq!(sizes[0], 1);
        prop_assert_eq!(*sizes.last().unwrap(), arm_count);
        for (index, &size) in sizes.iter().enumerate() {
            prop_assert_eq!(size, (1usize << index).min(arm_count));
        }
        prop_assert!(sizes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sampled_brackets_are_prefixes_of_one_order(
        arm_count in 2usize..=256,
        seed in any::<u64>(),
    ) {
        let set = BracketSet::sample(arm_count, &mut RngStream::new(seed).rng()).unwrap();
        let mut sorted = set.order().to_vec();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..arm_count).collect::<Vec<_>>());
        for number in 1..=set.count() {
            let size = set.sizes()[number - 1];
            prop_assert_eq!(set.bracket(number), &set.order()[..size]);
        }
    }

    // -----------------------------------------------------------------
    // Lower-bound program
    // -----------------------------------------------------------------

    #[test]
    fn program_objective_is_convex_along_segments(
        instance in positive_instance(),
        raw_p in prop::collection::vec(0.01..=1.0f64, 6),
        raw_q in prop::collection::vec(0.01..=1.0f64, 6),
        lambda in 0.0..=1.0f64,
    ) {
        let objective = ProgramObjective::from_instance(&instance, 0.01).unwrap();
        let dim = objective.dim();
        let p = slice_point(dim, &raw_p);
        let q = slice_point(dim, &raw_q);
        let mix: Vec<f64> = p
            .iter()
            .zip(&q)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        let bound = lambda * objective.value(&p) + (1.0 - lambda) * objective.value(&q);
        let slack = 1e-9 * bound.abs().max(1.0);
        prop_assert!(objective.value(&mix) <= bound + slack);
    }

    #[test]
    fn dual_certificate_stays_below_every_feasible_value(
        instance in positive_instance(),
        delta in 1e-6..=0.1f64,
        raw in prop::collection::vec(0.01..=1.0f64, 6),
        stretch in 1.0..=1.9f64,
    ) {
        // Weak duality, witnessed pointwise: the certificate must sit below
        // the objective at arbitrary feasible points (slice points and
        // stretched ones with more than half the mass). The certificate
        // targets the small-tolerance regime, hence the delta range.
        let objective = ProgramObjective::from_instance(&instance, delta).unwrap();
        let dual = dual_feasible_value(&instance, delta).unwrap();
        let mut point = slice_point(objective.dim(), &raw);
        prop_assert!(dual <= objective.value(&point) * (1.0 + 1e-12));
        for weight in &mut point {
            *weight = (*weight * stretch).min(1.0);
        }
        prop_assert!(dual <= objective.value(&point) * (1.0 + 1e-12));
    }

    // -----------------------------------------------------------------
    // Harness statistics
    // -----------------------------------------------------------------

    #[test]
    fn wilson_interval_brackets_the_point_estimate(
        trials in 1u64..=10_000_000,
        numerator in any::<u64>(),
    ) {
        let successes = numerator % (trials + 1);
        let (lo, hi) = wilson_interval(successes, trials);
        let rate = successes as f64 / trials as f64;
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!((0.0..=1.0).contains(&hi));
        prop_assert!(lo <= rate + 1e-12);
        prop_assert!(hi >= rate - 1e-12);
        if successes < trials {
            let (lo_next, hi_next) = wilson_interval(successes + 1, trials);
            prop_assert!(lo_next >= lo - 1e-12);
            prop_assert!(hi_next >= hi - 1e-12);
        }
    }

    // -----------------------------------------------------------------
    // File formats
    // -----------------------------------------------------------------

    #[test]
    fn instance_files_round_trip(
        means in prop::collection::vec(0.0..=1.0f64, 1..=8),
        threshold in 0.0..=1.0f64,
        half_width in prop::option::of(0.01..=2.0f64),
    ) {
        let instance = match half_width {
            None => BanditInstance::gaussian(means, threshold).unwrap(),
            Some(width) => BanditInstance::new(
                means,
                threshold,
                threshold_bandit::instance::NoiseModel::Bounded { half_width: width },
            )
            .unwrap(),
        };
        let text = instance.to_toml_string();
        let (reparsed, _warnings) = BanditInstance::from_toml_str(&text).unwrap();
        prop_assert_eq!(reparsed, instance);
    }
}

// ---------------------------------------------------------------------
// Search determinism (few cases: each runs a full bracketed search twice)
// ---------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bracketed_search_is_deterministic_in_the_stream(
        means in prop::collection::vec(
            prop_oneof![0.0..=0.25f64, 0.75..=1.0f64],
            2..=4,
        ),
        delta in 0.05..=0.3f64,
        seed in any::<u64>(),
    ) {
        let instance = BanditInstance::gaussian(means, 0.5).unwrap();
        let params = SearchParams::new(delta);
        let first = run_bracketed(&instance, &params, RngStream::new(seed));
        let second = run_bracketed(&instance, &params, RngStream::new(seed));
        match (first, second) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.answer, b.answer);
                prop_assert_eq!(a.total_draws, b.total_draws);
                prop_assert_eq!(a.winning_bracket, b.winning_bracket);
                prop_assert_eq!(a.winning_rounds, b.winning_rounds);
                prop_assert_eq!(a.per_copy_draws, b.per_copy_draws);
                prop_assert_eq!(a.per_arm_draws, b.per_arm_draws);
                prop_assert_eq!(a.copy_tolerance, b.copy_tolerance);
                prop_assert_eq!(a.order, b.order);
                prop_assert_eq!(a.bracket_sizes, b.bracket_sizes);
                prop_assert_eq!(a.truncated, b.truncated);
            }
            (Err(a), Err(b)) => prop_assert_eq!(format!("{a}"), format!("{b}")),
            (a, b) => prop_assert!(false, "runs diverged: {a:?} vs {b:?}"),
        }
    }
}
