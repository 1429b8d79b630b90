//! Indexing of daily activities in wearable-camera video.
//!
//! The crate turns block motion vectors from an egocentric recording into an
//! activity timeline in five stages:
//!
//! 1. [`motion`]: fit a global affine motion model per frame and split the
//!    video into temporal segments wherever the accumulated corner
//!    trajectories exceed an image-relative threshold.
//! 2. [`descriptors`]: summarize each segment with motion histograms and a
//!    compact color layout of its key frame.
//! 3. [`localization`]: classify the rough place of each segment with a
//!    vocabulary tree over key-frame descriptors and a nearest-neighbor vote.
//! 4. [`sequence`]: model activities as a two-level hidden Markov chain with
//!    Gaussian-mixture emissions, trained per activity and flattened for
//!    decoding.
//! 5. [`evaluate`]: score a decoded timeline against ground truth with a
//!    confusion matrix and per-class precision, recall, and F-measure.
//!
//! The [`synth`] and [`pipeline`] modules provide a deterministic scenario
//! generator and an end-to-end harness; the `egoindex` binary exposes both on
//! the command line. Runnable walkthroughs of every stage live in the
//! `examples/` directory.

pub mod config;
pub mod descriptors;
pub mod evaluate;
pub mod io;
mod kmeans;
pub mod localization;
pub mod manifest;
pub mod motion;
pub mod pipeline;
mod seed;
pub mod sequence;
pub mod synth;
