//! Dataset manifest: one JSON file naming every artifact of a dataset, the
//! shared frame geometry, and the label vocabularies, plus a consistency
//! check that the referenced files exist and agree on the frame count.

use crate::io::{self, IoError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("missing dataset file: {0}")]
    MissingFile(PathBuf),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

/// Paths are stored relative to the manifest's directory so a dataset can
/// be moved wholesale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n_frames: usize,
    pub width: u32,
    pub height: u32,
    pub frame_rate: f64,
    /// Activity labels in class-index order.
    pub activity_names: Vec<String>,
    /// Location labels in class-index order.
    pub location_names: Vec<String>,
    /// Frames carrying local descriptors are spaced this many frames apart.
    pub descriptor_stride: usize,
    pub block_motion: String,
    pub local_descriptors: String,
    pub frames_dir: String,
    pub activity_labels: String,
    pub location_labels: String,
    /// Scripted ground-truth motion, present for synthetic datasets.
    pub true_motion: Option<String>,
}

impl DatasetManifest {
    /// The canonical relative layout used by the synthetic generator.
    pub fn standard(
        n_frames: usize,
        width: u32,
        height: u32,
        frame_rate: f64,
        activity_names: Vec<String>,
        location_names: Vec<String>,
        descriptor_stride: usize,
    ) -> Self {
        DatasetManifest {
            n_frames,
            width,
            height,
            frame_rate,
            activity_names,
            location_names,
            descriptor_stride,
            block_motion: "block_motion.csv".into(),
            local_descriptors: "local_descriptors.csv".into(),
            frames_dir: "frames".into(),
            activity_labels: "activity_labels.csv".into(),
            location_labels: "location_labels.csv".into(),
            true_motion: Some("true_motion.csv".into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        Ok(io::write_json(path, self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        Ok(io::read_json(path)?)
    }

    pub fn resolve(&self, root: &Path, relative: &str) -> PathBuf {
        root.join(relative)
    }

    pub fn frame_path(&self, root: &Path, frame: usize) -> PathBuf {
        root.join(&self.frames_dir).join(format!("frame_{:05}.ppm", frame))
    }

    /// Checks that every referenced file exists and that the frame counts
    /// agree across labels, frames, motion fields, and descriptors.
    pub fn validate(&self, root: &Path) -> Result<(), ManifestError> {
        if self.n_frames == 0 {
            return Err(ManifestError::Inconsistent("dataset has no frames".into()));
        }
        if self.descriptor_stride == 0 {
            return Err(ManifestError::Inconsistent("descriptor stride must be positive".into()));
        }
        for relative in [
            &self.block_motion,
            &self.local_descriptors,
            &self.activity_labels,
            &self.location_labels,
        ] {
            let path = self.resolve(root, relative);
            if !path.is_file() {
                return Err(ManifestError::MissingFile(path));
            }
        }
        for frame in 0..self.n_frames {
            let path = self.frame_path(root, frame);
            if !path.is_file() {
                return Err(ManifestError::MissingFile(path));
            }
        }

        let activities =
            io::read_labels_csv(&self.resolve(root, &self.activity_labels), "activity")?;
        if activities.len() != self.n_frames {
            return Err(ManifestError::Inconsistent(format!(
                "{} activity labels for {} frames",
                activities.len(),
                self.n_frames
            )));
        }
        for label in &activities {
            if !self.activity_names.contains(label) {
                return Err(ManifestError::Inconsistent(format!("unknown activity `{}`", label)));
            }
        }
        let locations = io::read_labels_csv(&self.resolve(root, &self.location_labels), "location")?;
        if locations.len() != self.n_frames {
            return Err(ManifestError::Inconsistent(format!(
                "{} location labels for {} frames",
                locations.len(),
                self.n_frames
            )));
        }
        for label in &locations {
            if !self.location_names.contains(label) {
                return Err(ManifestError::Inconsistent(format!("unknown location `{}`", label)));
            }
        }

        let fields = io::read_block_motion_csv(
            &self.resolve(root, &self.block_motion),
            self.width,
            self.height,
        )?;
        for field in &fields {
            if field.frame_index == 0 || field.frame_index >= self.n_frames {
                return Err(ManifestError::Inconsistent(format!(
                    "motion field for frame {} outside 1..{}",
                    field.frame_index, self.n_frames
                )));
            }
        }

        let descriptors = io::read_descriptor_csv(&self.resolve(root, &self.local_descriptors))?;
        for d in &descriptors {
            if d.frame_index >= self.n_frames {
                return Err(ManifestError::Inconsistent(format!(
                    "descriptor for frame {} outside 0..{}",
                    d.frame_index, self.n_frames
                )));
            }
        }
        // Every stride-length window must contain a descriptor-bearing
        // frame, so every segment of at least that length can be localized.
        let mut bearing = vec![false; self.n_frames];
        for d in &descriptors {
            bearing[d.frame_index] = true;
        }
        for window in bearing.windows(self.descriptor_stride.min(self.n_frames)) {
            if !window.iter().any(|&b| b) {
                return Err(ManifestError::Inconsistent(format!(
                    "a {}-frame window has no local descriptors",
                    self.descriptor_stride
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::RgbImage;
    use crate::localization::LocalDescriptor;
    use crate::motion::{BlockMotionField, BlockMotionVector};
    use std::fs;

    fn tiny_dataset(dir: &Path) -> DatasetManifest {
        let n_frames = 10;
        let manifest = DatasetManifest::standard(
            n_frames,
            32,
            24,
            25.6,
            vec!["walk".into(), "read".into()],
            vec!["hall".into(), "room".into()],
            5,
        );
        let labels: Vec<String> =
            (0..n_frames).map(|f| if f < 5 { "walk".into() } else { "read".into() }).collect();
        io::write_labels_csv(&dir.join(&manifest.activity_labels), "activity", &labels).unwrap();
        let rooms: Vec<String> =
            (0..n_frames).map(|f| if f < 5 { "hall".into() } else { "room".into() }).collect();
        io::write_labels_csv(&dir.join(&manifest.location_labels), "location", &rooms).unwrap();
        let fields: Vec<BlockMotionField> = (1..n_frames)
            .map(|frame| BlockMotionField {
                frame_index: frame,
                width: 32,
                height: 24,
                vectors: vec![BlockMotionVector { cx: 8.0, cy: 8.0, dx: 1.0, dy: 0.0 }],
            })
            .collect();
        io::write_block_motion_csv(&dir.join(&manifest.block_motion), &fields).unwrap();
        let descriptors: Vec<LocalDescriptor> = (0..n_frames)
            .step_by(5)
            .map(|frame| LocalDescriptor { frame_index: frame, vector: vec![1.0, 2.0] })
            .collect();
        io::write_descriptor_csv(&dir.join(&manifest.local_descriptors), &descriptors).unwrap();
        fs::create_dir_all(dir.join(&manifest.frames_dir)).unwrap();
        for frame in 0..n_frames {
            io::write_ppm(&manifest.frame_path(dir, frame), &RgbImage::filled(32, 24, [9, 9, 9]))
                .unwrap();
        }
        manifest
    }

    #[test]
    fn round_trip_preserves_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = DatasetManifest::standard(
            12,
            64,
            64,
            25.6,
            vec!["a".into()],
            vec!["x".into()],
            5,
        );
        let path = dir.path().join("manifest.json");
        manifest.save(&path).unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap(), manifest);
    }

    #[test]
    fn a_consistent_dataset_validates() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_dataset(dir.path());
        manifest.validate(dir.path()).unwrap();
    }

    #[test]
    fn a_missing_frame_image_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_dataset(dir.path());
        fs::remove_file(manifest.frame_path(dir.path(), 3)).unwrap();
        assert!(matches!(
            manifest.validate(dir.path()),
            Err(ManifestError::MissingFile(_))
        ));
    }

    #[test]
    fn label_count_mismatch_is_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = tiny_dataset(dir.path());
        manifest.n_frames = 9;
        // Frame 9 now has an extra label and an extra image; trim the image
        // check by keeping n_frames consistent with the files we probe.
        let err = manifest.validate(dir.path()).unwrap_err();
        assert!(matches!(err, ManifestError::Inconsistent(_)));
    }

    #[test]
    fn unknown_labels_are_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = tiny_dataset(dir.path());
        manifest.activity_names = vec!["walk".into()];
        let err = manifest.validate(dir.path()).unwrap_err();
        assert!(err.to_string().contains("unknown activity"));
    }

    #[test]
    fn descriptor_gaps_violate_the_window_guarantee() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_dataset(dir.path());
        // Remove the frame-5 descriptor: frames 1..=9 have none, so some
        // 5-frame window is empty.
        let descriptors =
            vec![LocalDescriptor { frame_index: 0, vector: vec![1.0, 2.0] }];
        io::write_descriptor_csv(&dir.path().join(&manifest.local_descriptors), &descriptors)
            .unwrap();
        let err = manifest.validate(dir.path()).unwrap_err();
        assert!(err.to_string().contains("window has no local descriptors"));
    }
}
