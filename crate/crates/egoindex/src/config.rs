//! Run configuration: every tunable of the pipeline in one serializable
//! struct with documented defaults and range validation.

use crate::descriptors::FeatureConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by [`RunConfig::validate`].
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A field is outside its documented range.
    #[error("config field `{field}` {requirement}")]
    OutOfRange { field: &'static str, requirement: &'static str },
}

/// All pipeline tunables.
///
/// The defaults are the reference operating point: cuts fire at one fifth of
/// the image width, segments span at least five frames, both motion
/// histograms use six bins, the vocabulary tree is 10-ary with three levels
/// (1111 nodes), emissions use three mixture components, each activity gets
/// three elementary states initialized with a 0.9 self-loop, the composite
/// model stays in an activity with probability 0.95, and one tenth of the
/// frames are reserved for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cut threshold as a fraction of image width.
    pub threshold_ratio: f64,
    /// Minimum segment length in frames.
    pub min_segment_len: usize,
    /// Number of dyadic look-back bins in the cut histogram.
    pub cut_bins: usize,
    /// Number of bins per translation parameter in the energy histogram.
    pub energy_bins: usize,
    /// Width of one energy histogram bin in log-energy units.
    pub energy_step: f64,
    /// Vocabulary tree branching factor.
    pub branching: usize,
    /// Vocabulary tree depth below the root.
    pub levels: usize,
    /// Gaussian mixture components per elementary state.
    pub mixture_components: usize,
    /// Elementary states per activity.
    pub states_per_activity: usize,
    /// Initial self-loop probability for elementary transitions.
    pub loop_init: f64,
    /// Probability of staying inside the current activity per step of the
    /// composite model.
    pub stay: f64,
    /// Fraction of each activity's frames reserved for training.
    pub train_fraction: f64,
    /// Which descriptors enter the observation vector.
    pub features: FeatureConfig,
    /// Root seed; every random stage derives its own stream from it.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threshold_ratio: 0.2,
            min_segment_len: 5,
            cut_bins: 6,
            energy_bins: 6,
            energy_step: 1.0,
            branching: 10,
            levels: 3,
            mixture_components: 3,
            states_per_activity: 3,
            loop_init: 0.9,
            stay: 0.95,
            train_fraction: 0.10,
            features: FeatureConfig::ALL,
            seed: 7,
        }
    }
}

impl RunConfig {
    /// Checks every field against its documented range. An empty feature
    /// selection is legal here; it is rejected at extraction time instead.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, field: &'static str, requirement: &'static str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { field, requirement })
            }
        }
        check(
            self.threshold_ratio > 0.0 && self.threshold_ratio <= 1.0,
            "threshold_ratio",
            "must be in (0, 1]",
        )?;
        check(self.min_segment_len >= 1, "min_segment_len", "must be at least 1")?;
        check(self.cut_bins >= 1, "cut_bins", "must be at least 1")?;
        check(self.energy_bins >= 2, "energy_bins", "must be at least 2")?;
        check(self.energy_step > 0.0, "energy_step", "must be positive")?;
        check(self.branching >= 2, "branching", "must be at least 2")?;
        check(self.levels >= 1, "levels", "must be at least 1")?;
        check(self.mixture_components >= 1, "mixture_components", "must be at least 1")?;
        check(self.states_per_activity >= 1, "states_per_activity", "must be at least 1")?;
        check(
            self.loop_init > 0.0 && self.loop_init <= 1.0,
            "loop_init",
            "must be in (0, 1]",
        )?;
        check(self.stay > 0.0 && self.stay < 1.0, "stay", "must be in (0, 1)")?;
        check(
            self.train_fraction > 0.0 && self.train_fraction < 1.0,
            "train_fraction",
            "must be in (0, 1)",
        )?;
        Ok(())
    }
}
