//! Sample-complexity measures of an instance.
//!
//! Each measure is a deterministic function of the mean gaps and governs one
//! regime of the identification problem. With arms ranked by descending mean
//! (rank 1 = best; rank ties broken by arm id) and extended index 0 for the
//! threshold:
//!
//! ```text
//! reject_all_cost        sum over all arms of 2 / gap(arm, threshold)^2
//!                        — certifying that *no* arm qualifies
//! below_vs_best_cost     sum over arms below the threshold of 2 / gap(arm, best)^2
//!                        — separating losers from the best arm
//! best_vs_threshold_cost 2 / gap(best, threshold)^2
//!                        — certifying the single best arm qualifies
//! best_vs_rest_cost      sum over non-best arms of 2 / gap(arm, best)^2
//!                        — classic best-arm-identification hardness
//! accept_side_cost       sum over qualified arms of 2 / gap(arm, threshold)^2
//! uniform_sampling_cost  (K/m - 1) / min_qualified_gap^2
//!                        — cost of finding one of m qualified arms by
//!                        uniform random probing
//! rank_cost[j-1]         (1/j) * sum over all arms a of
//!                        1 / max{ gap(rank j, a)^2, gap(a, threshold)^2 }
//!                        — cost of stopping via the j-th best arm
//! ```
//!
//! Any measure whose defining gap vanishes is `+inf` (never a panic): an
//! instance with an arm exactly at the threshold simply cannot be certified
//! through that arm in finite time.

use serde::Serialize;

use crate::instance::BanditInstance;

/// All complexity measures of one instance, computed eagerly.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexityProfile {
    /// Number of arms `K`.
    pub arm_count: usize,
    /// Absolute mean gaps over extended indices: `gaps[i][j]` with `0` the
    /// threshold and `1..=K` arms in user order.
    pub gaps: Vec<Vec<f64>>,
    /// Arm ids sorted by descending mean (ties by ascending id); `ranking[0]`
    /// is the best arm.
    pub ranking: Vec<usize>,
    /// Number of arms strictly above the threshold (`m`).
    pub qualified_count: usize,
    /// Smallest gap to the threshold among qualified arms; `+inf` if none.
    pub min_qualified_gap: f64,
    /// Cost of certifying that no arm qualifies.
    pub reject_all_cost: f64,
    /// Cost of separating below-threshold arms from the best arm.
    pub below_vs_best_cost: f64,
    /// Cost of certifying the best arm against the threshold alone.
    pub best_vs_threshold_cost: f64,
    /// Best-arm-identification cost of the best arm against all others.
    pub best_vs_rest_cost: f64,
    /// Cost of certifying every qualified arm against the threshold.
    pub accept_side_cost: f64,
    /// Cost of locating one qualified arm by uniform probing.
    pub uniform_sampling_cost: f64,
    /// `rank_cost[j-1]` is the cost of stopping via the j-th best arm, for
    /// each qualified rank `j = 1..=qualified_count`. Empty when no arm
    /// qualifies.
    pub rank_cost: Vec<f64>,
}

/// `2 / gap^2`, which is `+inf` for a zero gap.
fn pair_cost(gap: f64) -> f64 {
    2.0 / (gap * gap)
}

impl ComplexityProfile {
    /// Computes every measure for `instance`.
    #[must_use]
    pub fn of(instance: &BanditInstance) -> Self {
        let arm_count = instance.arm_count();
        let threshold = instance.threshold();
        let means = instance.means();

        let extended = |i: usize| if i == 0 { threshold } else { means[i - 1] };
        let gaps: Vec<Vec<f64>> = (0..=arm_count)
            .map(|i| (0..=arm_count).map(|j| (extended(i) - extended(j)).abs()).collect())
            .collect();

        let mut ranking: Vec<usize> = (0..arm_count).collect();
        ranking.sort_by(|&a, &b| {
            means[b].partial_cmp(&means[a]).expect("means are finite").then(a.cmp(&b))
        });
        let ranked_mean = |rank: usize| means[ranking[rank - 1]]; // rank is 1-based

        let qualified_count = instance.qualified_count();
        let min_qualified_gap = means
            .iter()
            .filter(|&&m| m > threshold)
            .map(|&m| m - threshold)
            .fold(f64::INFINITY, f64::min);

        let best = ranked_mean(1);
        let reject_all_cost: f64 =
            means.iter().map(|&m| pair_cost(m - threshold)).sum();
        let below_vs_best_cost: f64 = means
            .iter()
            .filter(|&&m| m < threshold)
            .map(|&m| pair_cost(best - m))
            .sum();
        let best_vs_threshold_cost = pair_cost(best - threshold);
        let best_vs_rest_cost: f64 = (2..=arm_count)
            .map(|rank| pair_cost(best - ranked_mean(rank)))
            .sum();
        let accept_side_cost: f64 = means
            .iter()
            .filter(|&&m| m >= threshold)
            .map(|&m| pair_cost(m - threshold))
            .sum();
        let uniform_sampling_cost = if qualified_count == 0 {
            f64::INFINITY
        } else {
            (arm_count as f64 / qualified_count as f64 - 1.0)
                / (min_qualified_gap * min_qualified_gap)
        };

        let rank_cost: Vec<f64> = (1..=qualified_count)
            .map(|j| {
                let mu_j = ranked_mean(j);
                let total: f64 = means
                    .iter()
                    .map(|&mu_a| {
                        let vs_rank = (mu_j - mu_a).powi(2);
                        let vs_threshold = (mu_a - threshold).powi(2);
                        1.0 / vs_rank.max(vs_threshold)
                    })
                    .sum();
                total / j as f64
            })
            .collect();

        Self {
            arm_count,
            gaps,
            ranking,
            qualified_count,
            min_qualified_gap,
            reject_all_cost,
            below_vs_best_cost,
            best_vs_threshold_cost,
            best_vs_rest_cost,
            accept_side_cost,
            uniform_sampling_cost,
            rank_cost,
        }
    }

    /// Gap between the rank-`j` arm (1-based rank) and the threshold.
    #[must_use]
    pub fn rank_gap_to_threshold(&self, j: usize) -> f64 {
        self.gaps[self.ranking[j - 1] + 1][0]
    }
}
