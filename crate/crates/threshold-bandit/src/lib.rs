//! Anytime algorithms and analysis tools for the thresholding bandit
//! identification problem: given `K` arms with unknown means and a known
//! threshold, find one arm whose mean exceeds the threshold, or report that
//! none does, with error probability at most a caller-chosen tolerance.
//!
//! # Layout
//!
//! - [`instance`] — problem descriptions (means, threshold, noise model),
//!   TOML (de)serialization, and classification into positive / negative /
//!   boundary instances.
//! - [`complexity`] — gap-based hardness summaries of an instance: rank
//!   costs, rejection cost, and the related sums the bounds are built from.
//! - [`confidence`] — anytime confidence radii, phase schedules, and the
//!   exploration/exploitation budget formulas used by the search engine.
//! - [`engine`] — the single-copy phased explore/exploit search, stepped
//!   one reward draw at a time against a [`engine::RewardSource`].
//! - [`brackets`] — nested random prefix brackets: sampling, exact small-`K`
//!   enumeration, and the exceedance tail bound.
//! - [`search`] — the full bracketed search: one engine copy per bracket,
//!   round-robin stepping, first verdict wins.
//! - [`baseline`] — a uniform-sampling reference algorithm with the same
//!   correctness contract, for cost comparisons.
//! - [`bounds`] — sample-complexity lower bounds (closed form, convex
//!   program with a projected-subgradient solver, dual certificate, and an
//!   exhaustive grid oracle for few-arm instances) and upper-bound formulas.
//! - [`sim`] — the Monte Carlo experiment harness: config files, parallel
//!   trials, per-trial records, and CSV/JSON summaries.
//! - [`checks`] — direct Monte Carlo verification of the concentration
//!   facts the engine relies on.
//! - [`rng`] — splittable deterministic random streams; every run is
//!   reproducible from one seed.
//!
//! # Determinism
//!
//! All randomized entry points take an explicit [`rng::RngStream`]. Two runs
//! with the same inputs and the same stream produce byte-identical outputs,
//! including CSV/JSON artifacts (wall-clock timings live only in optional
//! trace files, which are excluded from that contract).
//!
//! # Example
//!
//! ```
//! use threshold_bandit::instance::BanditInstance;
//! use threshold_bandit::rng::RngStream;
//! use threshold_bandit::search::{run_bracketed, SearchParams};
//!
//! let instance = BanditInstance::gaussian(vec![0.95, 0.05], 0.5).unwrap();
//! let params = SearchParams::new(0.1);
//! let outcome = run_bracketed(&instance, &params, RngStream::new(7)).unwrap();
//! assert_eq!(outcome.answer, Some(0));
//! ```

pub mod baseline;
pub mod bounds;
pub mod brackets;
pub mod checks;
pub mod complexity;
pub mod confidence;
pub mod engine;
pub mod instance;
pub mod rng;
pub mod search;
pub mod sim;

pub use instance::{BanditInstance, InstanceClass, NoiseModel};
pub use rng::RngStream;
pub use search::{run_bracketed, SearchOutcome, SearchParams};
