//! Problem instances: arm means, the acceptance threshold, and reward noise.
//!
//! An instance is a bandit with `K` arms whose rewards are `mean + noise`,
//! plus a fixed threshold. The identification task is to output an arm whose
//! mean is at or above the threshold, or to report that no arm qualifies.
//! Instances split into three classes by their best mean:
//!
//! ```text
//! positive   max mean >  threshold   (correct answers: any arm with mean >= threshold)
//! negative   max mean <  threshold   (correct answer: "none")
//! boundary   max mean == threshold   (either answer is acceptable; runners
//!                                     refuse these because no finite-sample
//!                                     guarantee exists at the boundary)
//! ```
//!
//! Gap notation used throughout the crate: index `0` denotes the threshold
//! and indices `1..=K` denote arms in user order, so `gap(i, 0)` is an arm's
//! distance to the threshold and `gap(i, j)` the distance between two arms.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reward noise attached to every arm.
///
/// All confidence machinery in this crate assumes 1-sub-Gaussian noise. Unit
/// Gaussian noise meets that exactly; uniform noise of half-width `h` is
/// `h`-sub-Gaussian, so `h <= 1` preserves every guarantee (values above 1
/// are accepted for stress testing but flagged by [`BanditInstance::warnings`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// Additive standard Gaussian noise: variance exactly 1.
    Gaussian,
    /// Additive uniform noise on `[-half_width, +half_width]`.
    Bounded {
        /// Half-width of the uniform support; must be finite and positive.
        half_width: f64,
    },
}

impl NoiseModel {
    /// Parses the file-format spelling: `"gaussian"` or `"bounded:<half-width>"`.
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        if text == "gaussian" {
            return Ok(Self::Gaussian);
        }
        if let Some(rest) = text.strip_prefix("bounded:") {
            let half_width: f64 = rest
                .trim()
                .parse()
                .map_err(|_| InstanceError::BadNoise(text.to_string()))?;
            if !half_width.is_finite() || half_width <= 0.0 {
                return Err(InstanceError::BadNoise(text.to_string()));
            }
            return Ok(Self::Bounded { half_width });
        }
        Err(InstanceError::BadNoise(text.to_string()))
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian => write!(f, "gaussian"),
            Self::Bounded { half_width } => write!(f, "bounded:{half_width}"),
        }
    }
}

/// Class of an instance relative to its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceClass {
    /// At least one arm mean strictly exceeds the threshold.
    Positive {
        /// Number of arms with mean strictly above the threshold.
        qualified_count: usize,
    },
    /// Every arm mean lies strictly below the threshold.
    Negative,
    /// The best mean equals the threshold exactly (and none exceed it).
    Boundary,
}

/// Errors raised while constructing or indexing an instance.
#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("instance needs at least one arm")]
    NoArms,
    #[error("arm {index} mean is not finite")]
    NonFiniteMean { index: usize },
    #[error("threshold is not finite")]
    NonFiniteThreshold,
    #[error("unrecognized noise spec {0:?} (expected \"gaussian\" or \"bounded:<half-width>\")")]
    BadNoise(String),
    #[error("extended index {index} out of range (threshold is 0, arms are 1..={arm_count})")]
    IndexOutOfRange { index: usize, arm_count: usize },
    #[error("arm {arm} out of range (instance has {arm_count} arms)")]
    ArmOutOfRange { arm: usize, arm_count: usize },
    #[error("instance file: {0}")]
    Format(String),
    #[error("could not read instance file: {0}")]
    Io(String),
}

/// A fully validated problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct BanditInstance {
    means: Vec<f64>,
    threshold: f64,
    noise: NoiseModel,
}

impl BanditInstance {
    /// Builds an instance, rejecting non-finite means or threshold.
    ///
    /// Means outside `[0, 1]` are legal (see [`Self::warnings`]) because
    /// nothing in the algorithms requires unit scale; the published constants
    /// are simply stated for that range.
    pub fn new(
        means: Vec<f64>,
        threshold: f64,
        noise: NoiseModel,
    ) -> Result<Self, InstanceError> {
        if means.is_empty() {
            return Err(InstanceError::NoArms);
        }
        for (index, &mean) in means.iter().enumerate() {
            if !mean.is_finite() {
                return Err(InstanceError::NonFiniteMean { index });
            }
        }
        if !threshold.is_finite() {
            return Err(InstanceError::NonFiniteThreshold);
        }
        Ok(Self { means, threshold, noise })
    }

    /// Convenience constructor with unit Gaussian noise.
    pub fn gaussian(means: Vec<f64>, threshold: f64) -> Result<Self, InstanceError> {
        Self::new(means, threshold, NoiseModel::Gaussian)
    }

    /// Number of arms `K`.
    #[must_use]
    pub fn arm_count(&self) -> usize {
        self.means.len()
    }

    /// Arm means in user order.
    #[must_use]
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Mean of one arm (0-based arm id).
    pub fn mean(&self, arm: usize) -> Result<f64, InstanceError> {
        self.means
            .get(arm)
            .copied()
            .ok_or(InstanceError::ArmOutOfRange { arm, arm_count: self.arm_count() })
    }

    /// The acceptance threshold.
    #[must_use]
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// The noise model shared by all arms.
    #[must_use]
    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// Classifies the instance by its best mean (exact float comparison; the
    /// boundary class really means bitwise equality with the threshold).
    #[must_use]
    pub fn classify(&self) -> InstanceClass {
        let qualified_count = self.means.iter().filter(|&&m| m > self.threshold).count();
        if qualified_count > 0 {
            return InstanceClass::Positive { qualified_count };
        }
        if self.means.contains(&self.threshold) {
            return InstanceClass::Boundary;
        }
        InstanceClass::Negative
    }

    /// Number of arms with mean strictly above the threshold.
    #[must_use]
    pub fn qualified_count(&self) -> usize {
        match self.classify() {
            InstanceClass::Positive { qualified_count } => qualified_count,
            _ => 0,
        }
    }

    /// Whether `answer` is a correct identification for this instance:
    /// an arm with mean at or above the threshold for positive instances,
    /// `None` for negative instances. On boundary instances both the exact
    /// boundary arm and `None` are accepted.
    #[must_use]
    pub fn is_correct_answer(&self, answer: Option<usize>) -> bool {
        match answer {
            Some(arm) => self
                .means
                .get(arm)
                .is_some_and(|&mean| mean >= self.threshold),
            None => !matches!(self.classify(), InstanceClass::Positive { .. }),
        }
    }

    /// Absolute mean gap between two extended indices, where `0` is the
    /// threshold and `1..=K` are arms in user order. `gap(i, i) == 0`.
    pub fn gap(&self, i: usize, j: usize) -> Result<f64, InstanceError> {
        let value = |index: usize| -> Result<f64, InstanceError> {
            if index == 0 {
                Ok(self.threshold)
            } else {
                self.means.get(index - 1).copied().ok_or(InstanceError::IndexOutOfRange {
                    index,
                    arm_count: self.arm_count(),
                })
            }
        };
        Ok((value(i)? - value(j)?).abs())
    }

    /// Draws one reward from `arm` (0-based) using the caller's generator.
    ///
    /// Consumes a deterministic amount of generator state per call, so a
    /// fixed stream position always yields the same reward.
    pub fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64, InstanceError> {
        let mean = self.mean(arm)?;
        let noise = match self.noise {
            NoiseModel::Gaussian => rng.sample::<f64, _>(StandardNormal),
            NoiseModel::Bounded { half_width } => rng.gen_range(-half_width..half_width),
        };
        Ok(mean + noise)
    }

    /// Non-fatal advisories: means outside `[0, 1]`, or bounded noise wider
    /// than the 1-sub-Gaussian envelope the confidence radii assume.
    #[must_use]
    pub fn warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for (arm, &mean) in self.means.iter().enumerate() {
            if !(0.0..=1.0).contains(&mean) {
                warnings.push(format!(
                    "arm {arm} mean {mean} lies outside [0, 1]; published constants assume unit-scale means"
                ));
            }
        }
        if let NoiseModel::Bounded { half_width } = self.noise {
            if half_width > 1.0 {
                warnings.push(format!(
                    "bounded noise half-width {half_width} exceeds 1; noise is then not 1-sub-Gaussian and confidence radii lose coverage"
                ));
            }
        }
        warnings
    }

    /// Parses the on-disk instance format (TOML):
    ///
    /// ```toml
    /// means = [0.9, 0.5]
    /// mu0 = 0.7
    /// noise = "gaussian"   # optional; or "bounded:<half-width>"
    /// ```
    pub fn from_toml_str(text: &str) -> Result<(Self, Vec<String>), InstanceError> {
        let raw: RawInstance =
            toml::from_str(text).map_err(|e| InstanceError::Format(e.to_string()))?;
        let instance = BanditInstance::try_from(raw)?;
        let warnings = instance.warnings();
        Ok((instance, warnings))
    }

    /// Reads and parses an instance file. See [`Self::from_toml_str`].
    pub fn from_path(path: &Path) -> Result<(Self, Vec<String>), InstanceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InstanceError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Serializes to the on-disk instance format.
    #[must_use]
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&RawInstance::from(self.clone())).expect("instance serializes")
    }
}

/// Wire representation of an instance (what the TOML files contain).
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RawInstance {
    means: Vec<f64>,
    mu0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<String>,
}

impl TryFrom<RawInstance> for BanditInstance {
    type Error = InstanceError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        let noise = match raw.noise.as_deref() {
            None => NoiseModel::Gaussian,
            Some(text) => NoiseModel::parse(text)?,
        };
        BanditInstance::new(raw.means, raw.mu0, noise)
    }
}

impl From<BanditInstance> for RawInstance {
    fn from(instance: BanditInstance) -> Self {
        Self {
            means: instance.means,
            mu0: instance.threshold,
            noise: Some(instance.noise.to_string()),
        }
    }
}

impl Serialize for BanditInstance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawInstance::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BanditInstance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawInstance::deserialize(deserializer)?;
        BanditInstance::try_from(raw).map_err(serde::de::Error::custom)
    }
}
