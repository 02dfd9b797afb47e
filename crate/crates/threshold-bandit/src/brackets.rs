//! Nested arm brackets over a shuffled order.
//!
//! The bracketed search hedges against not knowing how many arms qualify: it
//! shuffles the arms once, then runs one engine copy per *bracket*, where
//! bracket `b` (1-based) is the prefix of the shuffled order of size
//! `min(2^(b-1), K)`. Brackets are nested and the last one always covers all
//! `K` arms, so there are `ceil(log2 K) + 1` of them:
//!
//! ```text
//! K = 5, shuffled order (3 0 4 1 2):
//!   bracket 1: (3)            bracket 3: (3 0 4 1)
//!   bracket 2: (3 0)          bracket 4: (3 0 4 1 2)
//! ```
//!
//! A small bracket that happens to catch a qualified arm finishes much
//! faster than the full bracket; the full bracket guarantees an answer
//! exists. The quantity of interest is the smallest bracket number that
//! contains one of the top `j` arms: for a uniform shuffle,
//!
//! ```text
//! Pr(smallest such bracket >= b)  <=  exp(-j * floor(2^(b-2)) / K)
//! ```
//!
//! so with high probability some geometrically small bracket already
//! contains a good arm.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

/// Errors from bracket construction and queries.
#[derive(Debug, Error, PartialEq)]
pub enum BracketError {
    #[error("brackets need at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("order is not a permutation of 0..{expected}")]
    NotAPermutation { expected: usize },
    #[error("top-arm count {top} out of range 1..={arm_count}")]
    TopOutOfRange { top: usize, arm_count: usize },
    #[error("exact enumeration supports at most {max} arms, got {0}", max = MAX_ENUMERATION_ARMS)]
    EnumerationTooLarge(usize),
}

/// Largest arm count for which exact permutation enumeration is offered
/// (8! = 40320 permutations starts to cost real time in debug builds).
pub const MAX_ENUMERATION_ARMS: usize = 7;

/// Number of brackets for `arm_count` arms: `ceil(log2 K) + 1`.
pub fn bracket_count(arm_count: usize) -> Result<usize, BracketError> {
    if arm_count < 2 {
        return Err(BracketError::TooFewArms(arm_count));
    }
    Ok(arm_count.next_power_of_two().trailing_zeros() as usize + 1)
}

/// Bracket sizes for `arm_count` arms: `min(2^(b-1), K)` for bracket
/// numbers `b = 1..=bracket_count`.
pub fn bracket_sizes(arm_count: usize) -> Result<Vec<usize>, BracketError> {
    let count = bracket_count(arm_count)?;
    Ok((0..count).map(|i| (1usize << i).min(arm_count)).collect())
}

/// A shuffled arm order with its nested bracket structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BracketSet {
    order: Vec<usize>,
    sizes: Vec<usize>,
}

impl BracketSet {
    /// Shuffles `0..arm_count` uniformly (Fisher-Yates via the generator)
    /// and builds the nested brackets over the result.
    pub fn sample<R: Rng + ?Sized>(arm_count: usize, rng: &mut R) -> Result<Self, BracketError> {
        let sizes = bracket_sizes(arm_count)?;
        let mut order: Vec<usize> = (0..arm_count).collect();
        order.shuffle(rng);
        Ok(Self { order, sizes })
    }

    /// Builds brackets over an explicit order (tests and exact enumeration).
    pub fn from_order(order: Vec<usize>) -> Result<Self, BracketError> {
        let sizes = bracket_sizes(order.len())?;
        let mut seen = vec![false; order.len()];
        for &arm in &order {
            if arm >= order.len() || seen[arm] {
                return Err(BracketError::NotAPermutation { expected: order.len() });
            }
            seen[arm] = true;
        }
        Ok(Self { order, sizes })
    }

    /// Total number of arms.
    #[must_use]
    pub fn arm_count(&self) -> usize {
        self.order.len()
    }

    /// The shuffled order underlying the brackets.
    #[must_use]
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of brackets.
    #[must_use]
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Bracket sizes in bracket-number order.
    #[must_use]
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// The arms of bracket `number` (1-based). The slice is a prefix of
    /// [`Self::order`], so brackets are nested by construction.
    #[must_use]
    pub fn bracket(&self, number: usize) -> &[usize] {
        &self.order[..self.sizes[number - 1]]
    }

    /// Smallest bracket number containing any arm of `targets`; `None` if
    /// no target is a valid arm id.
    pub fn min_bracket_containing<I>(&self, targets: I) -> Option<usize>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut is_target = vec![false; self.order.len()];
        let mut any = false;
        for arm in targets {
            if arm < self.order.len() {
                is_target[arm] = true;
                any = true;
            }
        }
        if !any {
            return None;
        }
        let first_position = self
            .order
            .iter()
            .position(|&arm| is_target[arm])
            .expect("a valid target exists in the permutation");
        let number = self
            .sizes
            .iter()
            .position(|&size| size > first_position)
            .expect("the last bracket holds every arm");
        Some(number + 1)
    }

    /// Smallest bracket number containing one of the `top` lowest arm ids
    /// (`{0, .., top-1}`); since the shuffle is uniform, any fixed set of
    /// `top` arms has the same distribution.
    pub fn min_qualified_bracket(&self, top: usize) -> Result<usize, BracketError> {
        if top == 0 || top > self.arm_count() {
            return Err(BracketError::TopOutOfRange { top, arm_count: self.arm_count() });
        }
        Ok(self.min_bracket_containing(0..top).expect("top arms are valid ids"))
    }
}

/// Closed-form tail bound `exp(-top * floor(2^(number-2)) / K)` on
/// `Pr(min qualified bracket >= number)` under a uniform shuffle. Vacuous
/// (equal to 1) for `number <= 1`.
#[must_use]
pub fn qualified_bracket_tail_bound(top: usize, number: usize, arm_count: usize) -> f64 {
    if number < 2 {
        return 1.0;
    }
    let prior_size = 1u64 << (number - 2); // floor(2^(number-2)) for number >= 2
    (-(top as f64) * prior_size as f64 / arm_count as f64).exp()
}

/// Exact exceedance probabilities `Pr(min qualified bracket >= number)` for
/// `number = 1..=bracket_count`, computed by enumerating all permutations
/// (hence the [`MAX_ENUMERATION_ARMS`] limit).
pub fn exact_qualified_bracket_exceedance(
    arm_count: usize,
    top: usize,
) -> Result<Vec<f64>, BracketError> {
    if arm_count > MAX_ENUMERATION_ARMS {
        return Err(BracketError::EnumerationTooLarge(arm_count));
    }
    let count = bracket_count(arm_count)?;
    if top == 0 || top > arm_count {
        return Err(BracketError::TopOutOfRange { top, arm_count });
    }
    let mut exceed = vec![0u64; count + 1];
    let mut total = 0u64;
    for perm in (0..arm_count).permutations(arm_count) {
        let set = BracketSet::from_order(perm).expect("enumerated orders are permutations");
        let hit = set.min_qualified_bracket(top).expect("top validated");
        for count in exceed.iter_mut().take(hit + 1).skip(1) {
            *count += 1;
        }
        total += 1;
    }
    Ok((1..=count).map(|number| exceed[number] as f64 / total as f64).collect())
}
