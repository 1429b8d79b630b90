//! Two-level activity sequence model: per-activity elementary HMMs with
//! Gaussian-mixture emissions trained by Baum-Welch, composed under a fixed
//! activity-level transition matrix, and decoded by Viterbi over segment
//! observations.

mod gmm;
mod hmm;

pub use gmm::{gmm_fit, Gaussian, GaussianMixture, GmmFit, Standardizer};
pub use hmm::{
    baum_welch, flatten, forward_backward, viterbi, ActivityModel, ActivityTransitions,
    BaumWelchOutcome, CompositeHmm, DecodedTimeline, ElementaryHmm, ForwardBackward,
    BW_MAX_ITERS, BW_REL_TOL, DEFAULT_LOOP_INIT, DEFAULT_STAY,
};

use thiserror::Error;

/// Errors raised while fitting or applying sequence models.
#[derive(Debug, Error)]
pub enum SequenceError {
    /// Fewer observations than the model has parameters to estimate.
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    /// An observation's dimension differs from the model's.
    #[error("observation dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Decoding requires at least one observation.
    #[error("observation sequence is empty")]
    EmptyObservations,
    /// A supplied model violates its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
