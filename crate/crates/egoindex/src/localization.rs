//! Image-based localization: a vocabulary tree over local descriptors,
//! per-frame signatures, 1-NN classification against labeled training
//! frames, and per-segment localization histograms.
//!
//! The tree is a complete b-ary hierarchy of k-means centroids stored in
//! level order. Each descriptor of a frame descends the tree greedily and
//! increments every node it visits, so a frame's signature is an L1
//! normalized count vector over all tree nodes.

use crate::kmeans;
use crate::seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by tree construction, quantization, or classification.
#[derive(Debug, Error)]
pub enum LocalizationError {
    /// Tree construction received no descriptors.
    #[error("cannot build a vocabulary tree from zero descriptors")]
    NoDescriptors,
    /// A descriptor's dimension differs from the tree's.
    #[error("descriptor dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A frame with no descriptors has an all-zero signature and no class.
    #[error("frame signature is all zero; the frame cannot be localized")]
    UnlocalizableFrame,
    /// A segment contained no localized frames.
    #[error("segment contains no localized frames")]
    NoLocalizedFrames,
    /// A location model failed validation.
    #[error("invalid location model: {0}")]
    InvalidModel(String),
}

/// One local image descriptor attached to a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDescriptor {
    pub frame_index: usize,
    pub vector: Vec<f64>,
}

/// A complete b-ary tree of k-means centroids, root at level 0, stored in
/// level order. Empty clusters are padded with their parent's centroid so
/// every internal node has exactly `branching` children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyTree {
    pub branching: usize,
    pub levels: usize,
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl VocabularyTree {
    /// Total node count over levels 0..=levels.
    pub fn node_count(&self) -> usize {
        tree_node_count(self.branching, self.levels)
    }

    /// First node index of a level.
    fn level_offset(&self, level: usize) -> usize {
        // Geometric series (b^level - 1) / (b - 1).
        (self.branching.pow(level as u32) - 1) / (self.branching - 1)
    }

    /// Global indices of a node's children.
    fn children(&self, level: usize, index_in_level: usize) -> (usize, usize) {
        let start = self.level_offset(level + 1) + index_in_level * self.branching;
        (start, start + self.branching)
    }
}

fn tree_node_count(branching: usize, levels: usize) -> usize {
    (0..=levels).map(|l| branching.pow(l as u32)).sum()
}

/// An L1-normalized visit-count vector over all tree nodes; all zero when
/// the frame had no descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub weights: Vec<f64>,
}

impl Signature {
    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }
}

/// Labeled training signatures for 1-NN location classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationModel {
    /// (signature, location class) pairs.
    pub entries: Vec<(Signature, usize)>,
    pub n_classes: usize,
}

impl LocationModel {
    /// Validates that every declared class has at least one example and no
    /// entry references a class out of range.
    pub fn new(entries: Vec<(Signature, usize)>, n_classes: usize) -> Result<Self, LocalizationError> {
        let mut seen = vec![false; n_classes];
        for (_, class) in &entries {
            if *class >= n_classes {
                return Err(LocalizationError::InvalidModel(format!(
                    "class {} out of range for {} classes",
                    class, n_classes
                )));
            }
            seen[*class] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(LocalizationError::InvalidModel(format!(
                "class {} has no training signature",
                missing
            )));
        }
        Ok(LocationModel { entries, n_classes })
    }
}

/// Empirical distribution of estimated location classes over one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationHistogram {
    pub bins: Vec<f64>,
}

/// Builds a vocabulary tree by hierarchical k-means: k = branching at the
/// root over all descriptors, then recursively within each child's
/// partition down to `levels`. Deterministic for a given seed.
pub fn build_tree(
    descriptors: &[LocalDescriptor],
    branching: usize,
    levels: usize,
    seed: u64,
) -> Result<VocabularyTree, LocalizationError> {
    assert!(branching >= 2, "branching factor must be at least 2");
    assert!(levels >= 1, "tree needs at least one level below the root");
    if descriptors.is_empty() {
        return Err(LocalizationError::NoDescriptors);
    }
    let dim = descriptors[0].vector.len();
    for d in descriptors {
        if d.vector.len() != dim {
            return Err(LocalizationError::DimensionMismatch { expected: dim, got: d.vector.len() });
        }
    }
    let data: Vec<Vec<f64>> = descriptors.iter().map(|d| d.vector.clone()).collect();
    let mut tree = VocabularyTree {
        branching,
        levels,
        dim,
        centroids: vec![vec![0.0; dim]; tree_node_count(branching, levels)],
    };

    // Root centroid: mean of everything.
    let mut root = vec![0.0; dim];
    for row in &data {
        for (r, v) in root.iter_mut().zip(row) {
            *r += v;
        }
    }
    for r in root.iter_mut() {
        *r /= data.len() as f64;
    }
    tree.centroids[0] = root;

    // Recursive split; every node derives its own generator from the root
    // seed and its global index, so sibling subtrees are independent.
    fn split(
        tree: &mut VocabularyTree,
        data: &[Vec<f64>],
        subset: &[usize],
        level: usize,
        index_in_level: usize,
        seed: u64,
    ) {
        if level == tree.levels {
            return;
        }
        let node = tree.level_offset(level) + index_in_level;
        let (child_start, child_end) = tree.children(level, index_in_level);
        let parent_centroid = tree.centroids[node].clone();
        if subset.is_empty() {
            for child in child_start..child_end {
                tree.centroids[child] = parent_centroid.clone();
            }
            for c in 0..tree.branching {
                split(tree, data, &[], level + 1, index_in_level * tree.branching + c, seed);
            }
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed::splitmix64(seed ^ node as u64));
        let fit = kmeans::fit(data, subset, tree.branching, &mut rng);
        let mut partitions: Vec<Vec<usize>> = vec![Vec::new(); tree.branching];
        for (j, &i) in subset.iter().enumerate() {
            partitions[fit.assignments[j]].push(i);
        }
        for c in 0..tree.branching {
            let child = child_start + c;
            tree.centroids[child] = if partitions[c].is_empty() {
                parent_centroid.clone()
            } else {
                fit.centroids[c].clone()
            };
        }
        for c in 0..tree.branching {
            split(
                tree,
                data,
                &partitions[c],
                level + 1,
                index_in_level * tree.branching + c,
                seed,
            );
        }
    }

    let all: Vec<usize> = (0..data.len()).collect();
    split(&mut tree, &data, &all, 0, 0, seed);
    Ok(tree)
}

/// Raw (unnormalized) visit counts of a frame's descriptors over the tree.
/// Each descriptor contributes one visit to the root and one per level.
pub fn quantize_counts(
    descriptors: &[LocalDescriptor],
    tree: &VocabularyTree,
) -> Result<Vec<f64>, LocalizationError> {
    let mut counts = vec![0.0; tree.node_count()];
    for d in descriptors {
        if d.vector.len() != tree.dim {
            return Err(LocalizationError::DimensionMismatch {
                expected: tree.dim,
                got: d.vector.len(),
            });
        }
        counts[0] += 1.0;
        let mut index_in_level = 0usize;
        for level in 0..tree.levels {
            let (child_start, child_end) = tree.children(level, index_in_level);
            let best =
                kmeans::nearest(&tree.centroids[child_start..child_end], &d.vector);
            counts[child_start + best] += 1.0;
            index_in_level = index_in_level * tree.branching + best;
        }
    }
    Ok(counts)
}

/// Quantizes one frame's descriptors into an L1-normalized signature. A
/// frame with zero descriptors yields the all-zero signature.
pub fn quantize_frame(
    descriptors: &[LocalDescriptor],
    tree: &VocabularyTree,
) -> Result<Signature, LocalizationError> {
    let mut weights = quantize_counts(descriptors, tree)?;
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
    Ok(Signature { weights })
}

/// 1-NN location class by L1 distance; ties go to the lowest class index.
pub fn classify_frame(sig: &Signature, model: &LocationModel) -> Result<usize, LocalizationError> {
    if sig.is_zero() {
        return Err(LocalizationError::UnlocalizableFrame);
    }
    if model.entries.is_empty() {
        return Err(LocalizationError::InvalidModel("no training signatures".into()));
    }
    let mut best_class = usize::MAX;
    let mut best_d = f64::INFINITY;
    for (train, class) in &model.entries {
        if train.weights.len() != sig.weights.len() {
            return Err(LocalizationError::DimensionMismatch {
                expected: sig.weights.len(),
                got: train.weights.len(),
            });
        }
        let d: f64 =
            train.weights.iter().zip(&sig.weights).map(|(a, b)| (a - b).abs()).sum();
        if d < best_d || (d == best_d && *class < best_class) {
            best_d = d;
            best_class = *class;
        }
    }
    Ok(best_class)
}

/// Empirical class distribution over a segment's frames. Entries with no
/// class (unlocalizable frames) are excluded from both counts.
pub fn localization_histogram(
    frame_classes: &[(usize, Option<usize>)],
    n_classes: usize,
) -> Result<LocalizationHistogram, LocalizationError> {
    let mut bins = vec![0.0; n_classes];
    let mut localized = 0usize;
    for (_, class) in frame_classes {
        if let Some(c) = class {
            assert!(*c < n_classes, "class {} out of range", c);
            bins[*c] += 1.0;
            localized += 1;
        }
    }
    if localized == 0 {
        return Err(LocalizationError::NoLocalizedFrames);
    }
    for b in bins.iter_mut() {
        *b /= localized as f64;
    }
    Ok(LocalizationHistogram { bins })
}
