//! The end-to-end pipeline: segment the video from block motion, extract
//! per-segment descriptors, train the location classifier and the two-level
//! activity model on an early slice of each activity, decode the full
//! timeline, and score it against the ground truth. Every stage reads and
//! writes declared files under one output directory, and the whole run is a
//! pure function of the dataset and the configuration seed.

use crate::config::{ConfigError, RunConfig};
use crate::descriptors::{
    assemble_observation, color_layout, cut_histogram_frame, cut_histogram_segment, tpe_histogram,
    DescriptorError, FeatureConfig, ObservationVector, SegmentDescriptors,
};
use crate::evaluate::{
    confusion, metrics, segment_ground_truth, summarize_sweep, ConfusionMatrix, EvaluateError,
    MetricsReport, SweepSummary,
};
use crate::io::{self, IoError};
use crate::localization::{
    build_tree, classify_frame, localization_histogram, quantize_frame, LocalDescriptor,
    LocalizationError, LocationModel, VocabularyTree,
};
use crate::manifest::{DatasetManifest, ManifestError};
use crate::motion::{cut_frames, estimate_affine, segment_video, AffineMotion, MotionError, Segment};
use crate::seed::splitmix64;
use crate::sequence::{
    baum_welch, flatten, viterbi, ActivityModel, ActivityTransitions, CompositeHmm,
    DecodedTimeline, SequenceError, Standardizer,
};
use crate::synth::SynthError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Stage-attributed pipeline failures.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("manifest: {0}")]
    Manifest(#[from] ManifestError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("segment stage: {0}")]
    Segment(#[from] MotionError),
    #[error("extract stage: {0}")]
    Extract(#[from] DescriptorError),
    #[error("localize stage: {0}")]
    Localize(#[from] LocalizationError),
    #[error("sequence model: {0}")]
    Sequence(#[from] SequenceError),
    #[error("evaluate stage: {0}")]
    Evaluate(#[from] EvaluateError),
    #[error("synth stage: {0}")]
    Synth(#[from] SynthError),
    #[error("no trained model at {0}; run `train` first")]
    MissingModel(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    /// Short machine-readable error category.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Io(_) => "io",
            PipelineError::Manifest(_) => "manifest",
            PipelineError::Config(_) => "config",
            PipelineError::Segment(_) => "segment",
            PipelineError::Extract(_) => "extract",
            PipelineError::Localize(_) => "localize",
            PipelineError::Sequence(_) => "sequence",
            PipelineError::Evaluate(_) => "evaluate",
            PipelineError::Synth(_) => "synth",
            PipelineError::MissingModel(_) => "missing-model",
            PipelineError::Invalid(_) => "invalid",
        }
    }
}

/// A dataset opened from its manifest; `root` is the manifest's directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    /// Loads and validates the dataset the manifest describes.
    pub fn load(manifest_path: &Path) -> Result<Dataset, PipelineError> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        manifest.validate(&root)?;
        Ok(Dataset { root, manifest })
    }

    fn labels_as_indices(&self, relative: &str, column: &str, names: &[String]) -> Result<Vec<usize>, PipelineError> {
        let labels = io::read_labels_csv(&self.root.join(relative), column)?;
        labels
            .iter()
            .map(|label| {
                names.iter().position(|n| n == label).ok_or_else(|| {
                    PipelineError::Invalid(format!("label `{}` missing from manifest", label))
                })
            })
            .collect()
    }

    /// Per-frame activity class indices.
    pub fn frame_activities(&self) -> Result<Vec<usize>, PipelineError> {
        self.labels_as_indices(
            &self.manifest.activity_labels.clone(),
            "activity",
            &self.manifest.activity_names,
        )
    }

    /// Per-frame location class indices.
    pub fn frame_locations(&self) -> Result<Vec<usize>, PipelineError> {
        self.labels_as_indices(
            &self.manifest.location_labels.clone(),
            "location",
            &self.manifest.location_names,
        )
    }
}

/// Segmentation artifacts: the estimated per-frame motions (identity at
/// frame 0, which has no incoming motion), the segments, and the cut frames.
#[derive(Debug, Clone)]
pub struct SegmentationOutput {
    pub motions: Vec<AffineMotion>,
    pub segments: Vec<Segment>,
    pub cut_frames: Vec<usize>,
}

/// Estimates robust global motion for every frame and segments the video.
/// A degenerate field carries the previous frame's motion forward.
pub fn segment_stage(ds: &Dataset, config: &RunConfig) -> Result<SegmentationOutput, PipelineError> {
    let fields = io::read_block_motion_csv(
        &ds.root.join(&ds.manifest.block_motion),
        ds.manifest.width,
        ds.manifest.height,
    )?;
    let n_frames = ds.manifest.n_frames;
    let mut motions = vec![AffineMotion::IDENTITY; n_frames];
    for field in &fields {
        motions[field.frame_index] = match estimate_affine(field, true) {
            Ok(motion) => motion,
            Err(MotionError::DegenerateField(_)) => motions[field.frame_index.saturating_sub(1)],
            Err(e) => return Err(e.into()),
        };
    }
    let segments = segment_video(
        &motions,
        ds.manifest.width as f64,
        ds.manifest.height as f64,
        config.threshold_ratio,
        config.min_segment_len,
    )?;
    let cut_frames = cut_frames(&segments);
    Ok(SegmentationOutput { motions, segments, cut_frames })
}

/// Computes the motion and color descriptors for every segment; the
/// localization slot stays empty until a location source is chosen.
pub fn descriptor_stage(
    ds: &Dataset,
    config: &RunConfig,
    seg: &SegmentationOutput,
) -> Result<Vec<SegmentDescriptors>, PipelineError> {
    let mut out = Vec::with_capacity(seg.segments.len());
    for segment in &seg.segments {
        let per_frame: Vec<Vec<f64>> = (segment.start_frame..=segment.end_frame)
            .map(|frame| cut_histogram_frame(&seg.cut_frames, frame, config.cut_bins))
            .collect();
        let cut = cut_histogram_segment(&per_frame)?;
        // Within-segment motions only; the motion into the start frame
        // crosses the preceding cut.
        let tpe = tpe_histogram(
            &seg.motions[segment.start_frame + 1..=segment.end_frame],
            config.energy_bins,
            config.energy_step,
        )?;
        let image = io::read_ppm(&ds.manifest.frame_path(&ds.root, segment.key_frame))?;
        let cld = color_layout(&image)?;
        out.push(SegmentDescriptors {
            cut: Some(cut),
            tpe: Some(tpe),
            color_layout: Some(cld),
            localization: None,
        });
    }
    Ok(out)
}

/// Marks the earliest segments of each activity, in timeline order, until
/// the marked segments cover `train_fraction` of that activity's frames.
pub fn train_split(
    segment_labels: &[usize],
    segments: &[Segment],
    n_activities: usize,
    train_fraction: f64,
) -> Vec<bool> {
    assert_eq!(segment_labels.len(), segments.len());
    let mut total = vec![0usize; n_activities];
    for (&label, segment) in segment_labels.iter().zip(segments) {
        total[label] += segment.len();
    }
    let target: Vec<f64> = total.iter().map(|&t| train_fraction * t as f64).collect();
    let mut got = vec![0.0f64; n_activities];
    segment_labels
        .iter()
        .zip(segments)
        .map(|(&label, segment)| {
            if got[label] < target[label] {
                got[label] += segment.len() as f64;
                true
            } else {
                false
            }
        })
        .collect()
}

/// The localization artifacts: the vocabulary tree, the 1-NN location
/// model built from training frames, and the predicted class of every
/// descriptor-bearing frame (training frames included).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocationArtifacts {
    pub tree: VocabularyTree,
    pub model: LocationModel,
    /// `(frame, predicted class)`; `None` marks an unlocalizable frame.
    pub classified: Vec<(usize, Option<usize>)>,
}

/// Builds the vocabulary tree and location model from descriptor-bearing
/// frames inside training segments, then classifies every bearing frame.
pub fn localize_stage(
    ds: &Dataset,
    config: &RunConfig,
    train_frame: &[bool],
) -> Result<LocationArtifacts, PipelineError> {
    let descriptors = io::read_descriptor_csv(&ds.root.join(&ds.manifest.local_descriptors))?;
    let locations = ds.frame_locations()?;
    let mut by_frame: BTreeMap<usize, Vec<LocalDescriptor>> = BTreeMap::new();
    for d in descriptors {
        by_frame.entry(d.frame_index).or_default().push(d);
    }
    let train_descriptors: Vec<LocalDescriptor> = by_frame
        .iter()
        .filter(|(frame, _)| train_frame[**frame])
        .flat_map(|(_, ds)| ds.iter().cloned())
        .collect();
    let tree_seed = splitmix64(config.seed ^ 0x7472_6565);
    let tree = build_tree(&train_descriptors, config.branching, config.levels, tree_seed)?;
    let mut entries = Vec::new();
    for (&frame, frame_descriptors) in &by_frame {
        if train_frame[frame] {
            let signature = quantize_frame(frame_descriptors, &tree)?;
            entries.push((signature, locations[frame]));
        }
    }
    let model = LocationModel::new(entries, ds.manifest.location_names.len())?;
    let mut classified = Vec::with_capacity(by_frame.len());
    for (&frame, frame_descriptors) in &by_frame {
        let signature = quantize_frame(frame_descriptors, &tree)?;
        let class = match classify_frame(&signature, &model) {
            Ok(class) => Some(class),
            Err(LocalizationError::UnlocalizableFrame) => None,
            Err(e) => return Err(e.into()),
        };
        classified.push((frame, class));
    }
    Ok(LocationArtifacts { tree, model, classified })
}

/// Per-segment location histograms over the classified bearing frames
/// inside each segment.
pub fn predicted_location_features(
    segments: &[Segment],
    classified: &[(usize, Option<usize>)],
    n_classes: usize,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    segments
        .iter()
        .map(|segment| {
            let inside: Vec<(usize, Option<usize>)> = classified
                .iter()
                .filter(|(frame, _)| segment.contains(*frame))
                .cloned()
                .collect();
            Ok(localization_histogram(&inside, n_classes)?.bins)
        })
        .collect()
}

/// Like [`predicted_location_features`], but reads the ground-truth
/// location of each bearing frame instead of classifying it; used to build
/// training observations.
pub fn ground_truth_location_features(
    segments: &[Segment],
    frame_locations: &[usize],
    stride: usize,
    n_classes: usize,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    segments
        .iter()
        .map(|segment| {
            let inside: Vec<(usize, Option<usize>)> = (segment.start_frame..=segment.end_frame)
                .filter(|frame| frame % stride == 0)
                .map(|frame| (frame, Some(frame_locations[frame])))
                .collect();
            Ok(localization_histogram(&inside, n_classes)?.bins)
        })
        .collect()
}

/// Assembles one observation vector per segment from the selected
/// descriptors, filling the localization slot from `location_features`
/// when that descriptor is selected.
pub fn extract_stage(
    config: &RunConfig,
    raw: &[SegmentDescriptors],
    location_features: Option<&[Vec<f64>]>,
) -> Result<Vec<ObservationVector>, PipelineError> {
    raw.iter()
        .enumerate()
        .map(|(i, descriptors)| {
            let mut with_location = descriptors.clone();
            if config.features.localization_histogram {
                let features = location_features.ok_or_else(|| {
                    PipelineError::Invalid(
                        "localization selected but no location features supplied".into(),
                    )
                })?;
                with_location.localization = Some(features[i].clone());
            }
            Ok(assemble_observation(&with_location, &config.features)?)
        })
        .collect()
}

/// Everything needed to decode new observation sequences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub composite: CompositeHmm,
    pub standardizer: Standardizer,
    pub activity_names: Vec<String>,
    pub features: FeatureConfig,
    pub states_per_activity: usize,
    pub mixture_components: usize,
    /// Layout of the observation vectors the model was trained on.
    pub layout: Vec<crate::descriptors::DescriptorLayout>,
}

/// Splits the training segments into maximal consecutive runs of one
/// activity; each run is one training sequence.
fn training_runs(
    segment_labels: &[usize],
    train_mask: &[bool],
    activity: usize,
) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for i in 0..segment_labels.len() {
        if train_mask[i] && segment_labels[i] == activity {
            match current.last() {
                Some(&last) if last + 1 == i => current.push(i),
                Some(_) => {
                    runs.push(std::mem::take(&mut current));
                    current.push(i);
                }
                None => current.push(i),
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

/// Fits the standardizer and one elementary model per activity on the
/// training segments, then flattens them into the composite model with a
/// uniform activity-transition prior.
pub fn train_stage(
    config: &RunConfig,
    activity_names: &[String],
    segment_labels: &[usize],
    train_mask: &[bool],
    train_observations: &[ObservationVector],
) -> Result<TrainedModel, PipelineError> {
    let layout = train_observations
        .first()
        .map(|o| o.layout.clone())
        .ok_or(PipelineError::Sequence(SequenceError::EmptyObservations))?;
    let train_values: Vec<Vec<f64>> = train_observations
        .iter()
        .zip(train_mask)
        .filter(|(_, &keep)| keep)
        .map(|(o, _)| o.values.clone())
        .collect();
    if train_values.is_empty() {
        return Err(PipelineError::Sequence(SequenceError::EmptyObservations));
    }
    let standardizer = Standardizer::fit(&train_values);
    let mut activities = Vec::with_capacity(activity_names.len());
    for (a, name) in activity_names.iter().enumerate() {
        let sequences: Vec<Vec<Vec<f64>>> = training_runs(segment_labels, train_mask, a)
            .into_iter()
            .map(|run| {
                run.into_iter()
                    .map(|i| standardizer.transform(&train_observations[i].values))
                    .collect()
            })
            .collect();
        let seed_value = splitmix64(config.seed ^ splitmix64(0xac71_0000 + a as u64));
        let outcome = baum_welch(
            &sequences,
            config.states_per_activity,
            config.mixture_components,
            config.loop_init,
            seed_value,
        )?;
        activities.push(ActivityModel { label: name.clone(), hmm: outcome.hmm });
    }
    let transitions = ActivityTransitions::uniform(activity_names.len());
    let composite = flatten(&activities, &transitions, config.stay)?;
    Ok(TrainedModel {
        composite,
        standardizer,
        activity_names: activity_names.to_vec(),
        features: config.features,
        states_per_activity: config.states_per_activity,
        mixture_components: config.mixture_components,
        layout,
    })
}

/// Standardizes the observations with the model's training statistics and
/// decodes the maximum-probability activity timeline.
pub fn decode_stage(
    model: &TrainedModel,
    observations: &[ObservationVector],
) -> Result<DecodedTimeline, PipelineError> {
    if let Some(first) = observations.first() {
        if first.layout != model.layout {
            return Err(PipelineError::Invalid(format!(
                "observation layout {:?} does not match the model's {:?}",
                first.layout.iter().map(|l| l.name.as_str()).collect::<Vec<_>>(),
                model.layout.iter().map(|l| l.name.as_str()).collect::<Vec<_>>()
            )));
        }
    }
    let values: Vec<Vec<f64>> = observations.iter().map(|o| o.values.clone()).collect();
    let standardized = model.standardizer.transform_all(&values);
    Ok(viterbi(&model.composite, &standardized)?)
}

/// The scored outcome of one pipeline run. Metrics cover the held-out
/// segments only; training segments are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub n_segments: usize,
    pub n_train_segments: usize,
    pub decode_log_probability: f64,
    pub seed: u64,
}

/// Scores the decoded timeline against the ground truth on the held-out
/// segments.
pub fn evaluate_stage(
    activity_names: &[String],
    segment_labels: &[usize],
    train_mask: &[bool],
    decoded: &DecodedTimeline,
) -> Result<(MetricsReport, ConfusionMatrix), PipelineError> {
    if decoded.labels.len() != segment_labels.len() {
        return Err(PipelineError::Evaluate(EvaluateError::LengthMismatch {
            truth: segment_labels.len(),
            predicted: decoded.labels.len(),
        }));
    }
    let predicted: Vec<usize> = decoded
        .labels
        .iter()
        .map(|label| {
            activity_names.iter().position(|n| n == label).ok_or_else(|| {
                PipelineError::Invalid(format!("decoded label `{}` is not an activity", label))
            })
        })
        .collect::<Result<_, _>>()?;
    let truth_test: Vec<usize> = segment_labels
        .iter()
        .zip(train_mask)
        .filter(|(_, &train)| !train)
        .map(|(&l, _)| l)
        .collect();
    let predicted_test: Vec<usize> = predicted
        .iter()
        .zip(train_mask)
        .filter(|(_, &train)| !train)
        .map(|(&l, _)| l)
        .collect();
    let cm = confusion(&truth_test, &predicted_test, activity_names.len())?;
    let report = metrics(&cm, activity_names);
    Ok((report, cm))
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path)
        .map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    Ok(())
}

/// Intermediate state shared between a full run and the sweep: everything
/// that does not depend on the feature selection or the state count.
struct Prepared {
    seg: SegmentationOutput,
    raw: Vec<SegmentDescriptors>,
    segment_labels: Vec<usize>,
    train_mask: Vec<bool>,
    predicted_loc: Option<Vec<Vec<f64>>>,
    ground_truth_loc: Option<Vec<Vec<f64>>>,
}

fn prepare(
    ds: &Dataset,
    config: &RunConfig,
    need_location: bool,
    out_dir: &Path,
) -> Result<Prepared, PipelineError> {
    let seg = segment_stage(ds, config)?;
    io::write_segments_csv(&out_dir.join("segments.csv"), &seg.segments)?;
    let estimated: Vec<(usize, AffineMotion)> =
        seg.motions.iter().enumerate().skip(1).map(|(f, m)| (f, *m)).collect();
    io::write_affine_csv(&out_dir.join("estimated_motion.csv"), &estimated)?;

    let frame_activities = ds.frame_activities()?;
    let segment_labels = segment_ground_truth(&frame_activities, &seg.segments)?;
    let train_mask = train_split(
        &segment_labels,
        &seg.segments,
        ds.manifest.activity_names.len(),
        config.train_fraction,
    );

    let raw = descriptor_stage(ds, config, &seg)?;

    let (predicted_loc, ground_truth_loc) = if need_location {
        let mut train_frame = vec![false; ds.manifest.n_frames];
        for (segment, &train) in seg.segments.iter().zip(&train_mask) {
            if train {
                for frame in segment.start_frame..=segment.end_frame {
                    train_frame[frame] = true;
                }
            }
        }
        let location = localize_stage(ds, config, &train_frame)?;
        io::write_json(&out_dir.join("voctree.json"), &location.tree)?;
        io::write_json(&out_dir.join("location_model.json"), &location.model)?;
        let n_classes = ds.manifest.location_names.len();
        let predicted =
            predicted_location_features(&seg.segments, &location.classified, n_classes)?;
        let truth = ground_truth_location_features(
            &seg.segments,
            &ds.frame_locations()?,
            ds.manifest.descriptor_stride,
            n_classes,
        )?;
        (Some(predicted), Some(truth))
    } else {
        (None, None)
    };

    Ok(Prepared { seg, raw, segment_labels, train_mask, predicted_loc, ground_truth_loc })
}

/// Trains, decodes, and scores one `(features, m)` cell from prepared
/// shared state, writing the cell's artifacts into `out_dir`.
fn run_cell(
    config: &RunConfig,
    ds: &Dataset,
    prepared: &Prepared,
    out_dir: &Path,
) -> Result<PipelineReport, PipelineError> {
    let observations =
        extract_stage(config, &prepared.raw, prepared.predicted_loc.as_deref())?;
    io::write_observations_csv(&out_dir.join("observations.csv"), &observations)?;
    let train_observations =
        extract_stage(config, &prepared.raw, prepared.ground_truth_loc.as_deref())?;

    let model = train_stage(
        config,
        &ds.manifest.activity_names,
        &prepared.segment_labels,
        &prepared.train_mask,
        &train_observations,
    )?;
    io::write_json(&out_dir.join("model.json"), &model)?;

    let decoded = decode_stage(&model, &observations)?;
    io::write_decoded_csv(
        &out_dir.join("decoded.csv"),
        &prepared.seg.segments,
        &decoded.labels,
        &decoded.states,
    )?;
    io::write_json(&out_dir.join("decode.json"), &decoded)?;

    let (mut report, cm) = evaluate_stage(
        &ds.manifest.activity_names,
        &prepared.segment_labels,
        &prepared.train_mask,
        &decoded,
    )?;
    report.features = Some(config.features);
    report.states_per_activity = Some(config.states_per_activity);
    io::write_confusion_csv(&out_dir.join("confusion.csv"), &cm, &ds.manifest.activity_names)?;
    io::write_confusion_normalized_csv(
        &out_dir.join("confusion_normalized.csv"),
        &cm,
        &ds.manifest.activity_names,
    )?;
    let full = PipelineReport {
        metrics: report,
        confusion: cm,
        n_segments: prepared.seg.segments.len(),
        n_train_segments: prepared.train_mask.iter().filter(|&&t| t).count(),
        decode_log_probability: decoded.log_probability,
        seed: config.seed,
    };
    io::write_json(&out_dir.join("report.json"), &full)?;
    Ok(full)
}

/// Runs the whole pipeline once and writes all artifacts into `out_dir`.
pub fn run_pipeline(
    manifest_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    create_dir(out_dir)?;
    let ds = Dataset::load(manifest_path)?;
    let prepared = prepare(&ds, config, config.features.localization_histogram, out_dir)?;
    run_cell(config, &ds, &prepared, out_dir)
}

/// Runs segmentation alone, writing `segments.csv` and
/// `estimated_motion.csv` into `out_dir`.
pub fn run_segment(
    manifest_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<Segment>, PipelineError> {
    config.validate()?;
    create_dir(out_dir)?;
    let ds = Dataset::load(manifest_path)?;
    let seg = segment_stage(&ds, config)?;
    io::write_segments_csv(&out_dir.join("segments.csv"), &seg.segments)?;
    let estimated: Vec<(usize, AffineMotion)> =
        seg.motions.iter().enumerate().skip(1).map(|(f, m)| (f, *m)).collect();
    io::write_affine_csv(&out_dir.join("estimated_motion.csv"), &estimated)?;
    Ok(seg.segments)
}

/// Builds the vocabulary tree and location model alone, writing
/// `voctree.json` and `location_model.json`. Returns the node count and
/// the number of training signatures.
pub fn run_build_voctree(
    manifest_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<(usize, usize), PipelineError> {
    config.validate()?;
    create_dir(out_dir)?;
    let ds = Dataset::load(manifest_path)?;
    let seg = segment_stage(&ds, config)?;
    let frame_activities = ds.frame_activities()?;
    let segment_labels = segment_ground_truth(&frame_activities, &seg.segments)?;
    let train_mask = train_split(
        &segment_labels,
        &seg.segments,
        ds.manifest.activity_names.len(),
        config.train_fraction,
    );
    let mut train_frame = vec![false; ds.manifest.n_frames];
    for (segment, &train) in seg.segments.iter().zip(&train_mask) {
        if train {
            for frame in segment.start_frame..=segment.end_frame {
                train_frame[frame] = true;
            }
        }
    }
    let location = localize_stage(&ds, config, &train_frame)?;
    io::write_json(&out_dir.join("voctree.json"), &location.tree)?;
    io::write_json(&out_dir.join("location_model.json"), &location.model)?;
    Ok((location.tree.node_count(), location.model.entries.len()))
}

/// Extracts per-segment observation vectors, writing `observations.csv`
/// (plus the prepared artifacts). Returns the count and dimension.
pub fn run_extract(
    manifest_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<(usize, usize), PipelineError> {
    config.validate()?;
    create_dir(out_dir)?;
    let ds = Dataset::load(manifest_path)?;
    let prepared = prepare(&ds, config, config.features.localization_histogram, out_dir)?;
    let observations = extract_stage(config, &prepared.raw, prepared.predicted_loc.as_deref())?;
    io::write_observations_csv(&out_dir.join("observations.csv"), &observations)?;
    let dim = observations.first().map(|o| o.dim()).unwrap_or(0);
    Ok((observations.len(), dim))
}

/// Trains the composite model, writing `model.json`, `observations.csv`,
/// and the prepared artifacts.
pub fn run_train(
    manifest_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<TrainedModel, PipelineError> {
    config.validate()?;
    create_dir(out_dir)?;
    let ds = Dataset::load(manifest_path)?;
    let prepared = prepare(&ds, config, config.features.localization_histogram, out_dir)?;
    let observations = extract_stage(config, &prepared.raw, prepared.predicted_loc.as_deref())?;
    io::write_observations_csv(&out_dir.join("observations.csv"), &observations)?;
    let train_observations =
        extract_stage(config, &prepared.raw, prepared.ground_truth_loc.as_deref())?;
    let model = train_stage(
        config,
        &ds.manifest.activity_names,
        &prepared.segment_labels,
        &prepared.train_mask,
        &train_observations,
    )?;
    io::write_json(&out_dir.join("model.json"), &model)?;
    Ok(model)
}

/// Decodes `observations.csv` with the trained model, writing
/// `decoded.csv` and `decode.json`. Consumes the artifacts of `segment`,
/// `extract`, and `train`; no dataset access is needed.
pub fn run_decode(out_dir: &Path, model_path: &Path) -> Result<DecodedTimeline, PipelineError> {
    if !model_path.is_file() {
        return Err(PipelineError::MissingModel(model_path.to_path_buf()));
    }
    let model: TrainedModel = io::read_json(model_path)?;
    let observations = io::read_observations_csv(&out_dir.join("observations.csv"))?;
    let segments = io::read_segments_csv(&out_dir.join("segments.csv"))?;
    if segments.len() != observations.len() {
        return Err(PipelineError::Invalid(format!(
            "{} segments but {} observations",
            segments.len(),
            observations.len()
        )));
    }
    let decoded = decode_stage(&model, &observations)?;
    io::write_decoded_csv(&out_dir.join("decoded.csv"), &segments, &decoded.labels, &decoded.states)?;
    io::write_json(&out_dir.join("decode.json"), &decoded)?;
    Ok(decoded)
}

/// Scores `decode.json` against the dataset ground truth on the held-out
/// segments, writing `report.json` and the confusion CSVs.
pub fn run_evaluate(
    manifest_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let ds = Dataset::load(manifest_path)?;
    let decode_path = out_dir.join("decode.json");
    if !decode_path.is_file() {
        return Err(PipelineError::Invalid(format!(
            "no decoded timeline at {}; run `decode` first",
            decode_path.display()
        )));
    }
    let decoded: DecodedTimeline = io::read_json(&decode_path)?;
    let segments = io::read_segments_csv(&out_dir.join("segments.csv"))?;
    let frame_activities = ds.frame_activities()?;
    let segment_labels = segment_ground_truth(&frame_activities, &segments)?;
    let train_mask = train_split(
        &segment_labels,
        &segments,
        ds.manifest.activity_names.len(),
        config.train_fraction,
    );
    let (mut report, cm) =
        evaluate_stage(&ds.manifest.activity_names, &segment_labels, &train_mask, &decoded)?;
    report.features = Some(config.features);
    report.states_per_activity = Some(config.states_per_activity);
    io::write_confusion_csv(&out_dir.join("confusion.csv"), &cm, &ds.manifest.activity_names)?;
    io::write_confusion_normalized_csv(
        &out_dir.join("confusion_normalized.csv"),
        &cm,
        &ds.manifest.activity_names,
    )?;
    let full = PipelineReport {
        metrics: report,
        confusion: cm,
        n_segments: segments.len(),
        n_train_segments: train_mask.iter().filter(|&&t| t).count(),
        decode_log_probability: decoded.log_probability,
        seed: config.seed,
    };
    io::write_json(&out_dir.join("report.json"), &full)?;
    Ok(full)
}

/// Renders a feature selection as the canonical `name+name` string.
pub fn format_feature_set(features: &FeatureConfig) -> String {
    features.selected_names().join("+")
}

/// Parses a `+`-joined feature selection: any of `cut`, `tpe`, `cld`,
/// `loc`.
pub fn parse_feature_set(text: &str) -> Result<FeatureConfig, PipelineError> {
    let mut features = FeatureConfig {
        cut_histogram: false,
        tpe_histogram: false,
        color_layout: false,
        localization_histogram: false,
    };
    for token in text.split('+') {
        match token.trim() {
            "cut" => features.cut_histogram = true,
            "tpe" => features.tpe_histogram = true,
            "cld" => features.color_layout = true,
            "loc" => features.localization_histogram = true,
            other => {
                return Err(PipelineError::Invalid(format!(
                    "unknown feature `{}` (expected cut, tpe, cld, or loc)",
                    other
                )))
            }
        }
    }
    Ok(features)
}

/// Trains and scores every `(features, m)` cell over one dataset, sharing
/// the segmentation, descriptors, and localization across cells. Returns
/// the ranked summary, which is also written to `sweep_report.json`.
pub fn run_sweep(
    manifest_path: &Path,
    base: &RunConfig,
    feature_sets: &[FeatureConfig],
    m_values: &[usize],
    out_dir: &Path,
) -> Result<SweepSummary, PipelineError> {
    base.validate()?;
    if feature_sets.is_empty() || m_values.is_empty() {
        return Err(PipelineError::Invalid("sweep needs at least one feature set and one m".into()));
    }
    create_dir(out_dir)?;
    let ds = Dataset::load(manifest_path)?;
    let need_location = feature_sets.iter().any(|f| f.localization_histogram);
    let prepared = prepare(&ds, base, need_location, out_dir)?;
    let mut reports = Vec::new();
    for features in feature_sets {
        for &m in m_values {
            let config = RunConfig { features: *features, states_per_activity: m, ..base.clone() };
            config.validate()?;
            let cell_name = format!("{}_m{}", format_feature_set(features).replace('+', "-"), m);
            let cell_dir = out_dir.join("cells").join(&cell_name);
            create_dir(&cell_dir)?;
            let report = run_cell(&config, &ds, &prepared, &cell_dir)?;
            reports.push(report.metrics);
        }
    }
    let summary = summarize_sweep(reports)?;
    io::write_json(&out_dir.join("sweep_report.json"), &summary)?;
    Ok(summary)
}
