//! File formats: columnar CSV for motion fields, descriptors, labels, and
//! segments; binary PPM (P6) for frames; JSON for manifests, models, and
//! reports. All numeric text uses Rust's shortest round-trip decimal
//! rendering, and every write is atomic (temp file then rename), so
//! re-running a stage with unchanged inputs produces byte-identical files.

use crate::descriptors::{DescriptorLayout, ObservationVector, RgbImage};
use crate::evaluate::ConfusionMatrix;
use crate::localization::LocalDescriptor;
use crate::motion::{AffineMotion, BlockMotionField, BlockMotionVector, Segment};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Errors attributed to a file, and to a line where applicable.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format { path: path.to_path_buf(), message: message.into() }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| format_err(path, "path has no file name"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{}.tmp", file_name));
    fs::write(&tmp, bytes).map_err(file_err(&tmp))?;
    fs::rename(&tmp, path).map_err(file_err(path))
}

/// Serializes `value` as pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| format_err(path, e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Reads a JSON value written by [`write_json`].
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| format_err(path, e.to_string()))
}

/// Reads a CSV file, checks its header, and returns the split data rows
/// with their 1-based line numbers. Fields are comma separated with no
/// quoting; none of the formats here need it.
fn read_csv(path: &Path, expected_header: &str) -> Result<Vec<(usize, Vec<String>)>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == expected_header => {}
        Some((_, header)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header `{}`, found `{}`", expected_header, header),
            ))
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        if line.is_empty() {
            continue;
        }
        rows.push((index + 1, line.split(',').map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: &str,
    what: &str,
) -> Result<T, IoError> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {} from `{}`", what, field)))
}

fn expect_width(path: &Path, line: usize, row: &[String], want: usize) -> Result<(), IoError> {
    if row.len() == want {
        Ok(())
    } else {
        Err(parse_err(path, line, format!("expected {} fields, found {}", want, row.len())))
    }
}

const BLOCK_MOTION_HEADER: &str = "frame,cx,cy,dx,dy";

/// One row per block vector, grouped by ascending frame index.
pub fn write_block_motion_csv(path: &Path, fields: &[BlockMotionField]) -> Result<(), IoError> {
    let mut text = String::from(BLOCK_MOTION_HEADER);
    text.push('\n');
    for field in fields {
        for v in &field.vectors {
            writeln!(text, "{},{},{},{},{}", field.frame_index, v.cx, v.cy, v.dx, v.dy).unwrap();
        }
    }
    atomic_write(path, text.as_bytes())
}

/// Rebuilds per-frame motion fields; the shared image dimensions come from
/// the dataset manifest. Rows must be grouped by non-decreasing frame index.
pub fn read_block_motion_csv(
    path: &Path,
    width: u32,
    height: u32,
) -> Result<Vec<BlockMotionField>, IoError> {
    let mut out: Vec<BlockMotionField> = Vec::new();
    for (line, row) in read_csv(path, BLOCK_MOTION_HEADER)? {
        expect_width(path, line, &row, 5)?;
        let frame: usize = parse_field(path, line, &row[0], "frame index")?;
        let vector = BlockMotionVector {
            cx: parse_field(path, line, &row[1], "cx")?,
            cy: parse_field(path, line, &row[2], "cy")?,
            dx: parse_field(path, line, &row[3], "dx")?,
            dy: parse_field(path, line, &row[4], "dy")?,
        };
        match out.last_mut() {
            Some(field) if field.frame_index == frame => field.vectors.push(vector),
            Some(field) if field.frame_index > frame => {
                return Err(parse_err(path, line, "frame indices out of order"))
            }
            _ => out.push(BlockMotionField { frame_index: frame, width, height, vectors: vec![vector] }),
        }
    }
    Ok(out)
}

const AFFINE_HEADER: &str = "frame,tx,ty,xx,xy,yx,yy";

/// One affine motion per row, keyed by frame index.
pub fn write_affine_csv(path: &Path, motions: &[(usize, AffineMotion)]) -> Result<(), IoError> {
    let mut text = String::from(AFFINE_HEADER);
    text.push('\n');
    for (frame, m) in motions {
        writeln!(text, "{},{},{},{},{},{},{}", frame, m.tx, m.ty, m.xx, m.xy, m.yx, m.yy).unwrap();
    }
    atomic_write(path, text.as_bytes())
}

pub fn read_affine_csv(path: &Path) -> Result<Vec<(usize, AffineMotion)>, IoError> {
    let mut out = Vec::new();
    for (line, row) in read_csv(path, AFFINE_HEADER)? {
        expect_width(path, line, &row, 7)?;
        let frame: usize = parse_field(path, line, &row[0], "frame index")?;
        out.push((
            frame,
            AffineMotion {
                tx: parse_field(path, line, &row[1], "tx")?,
                ty: parse_field(path, line, &row[2], "ty")?,
                xx: parse_field(path, line, &row[3], "xx")?,
                xy: parse_field(path, line, &row[4], "xy")?,
                yx: parse_field(path, line, &row[5], "yx")?,
                yy: parse_field(path, line, &row[6], "yy")?,
            },
        ));
    }
    Ok(out)
}

/// Per-frame label column; row `i` describes frame `i`.
pub fn write_labels_csv(path: &Path, column: &str, labels: &[String]) -> Result<(), IoError> {
    let mut text = format!("frame,{}\n", column);
    for (frame, label) in labels.iter().enumerate() {
        writeln!(text, "{},{}", frame, label).unwrap();
    }
    atomic_write(path, text.as_bytes())
}

/// Reads a label column; frames must be contiguous from zero.
pub fn read_labels_csv(path: &Path, column: &str) -> Result<Vec<String>, IoError> {
    let header = format!("frame,{}", column);
    let mut out = Vec::new();
    for (line, row) in read_csv(path, &header)? {
        expect_width(path, line, &row, 2)?;
        let frame: usize = parse_field(path, line, &row[0], "frame index")?;
        if frame != out.len() {
            return Err(parse_err(path, line, format!("expected frame {}, found {}", out.len(), frame)));
        }
        out.push(row[1].clone());
    }
    Ok(out)
}

/// One local descriptor per row; the column count declares the dimension.
pub fn write_descriptor_csv(path: &Path, descriptors: &[LocalDescriptor]) -> Result<(), IoError> {
    let dim = descriptors.first().map(|d| d.vector.len()).unwrap_or(0);
    let mut text = String::from("frame");
    for d in 0..dim {
        write!(text, ",d{}", d).unwrap();
    }
    text.push('\n');
    for desc in descriptors {
        write!(text, "{}", desc.frame_index).unwrap();
        for v in &desc.vector {
            write!(text, ",{}", v).unwrap();
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

pub fn read_descriptor_csv(path: &Path) -> Result<Vec<LocalDescriptor>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"frame") {
        return Err(parse_err(path, 1, "expected first column `frame`"));
    }
    for (d, name) in columns[1..].iter().enumerate() {
        if *name != format!("d{}", d) {
            return Err(parse_err(path, 1, format!("expected column `d{}`, found `{}`", d, name)));
        }
    }
    let dim = columns.len() - 1;
    let mut out = Vec::new();
    for (index, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = index + 1;
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != dim + 1 {
            return Err(parse_err(path, line_no, format!("expected {} fields, found {}", dim + 1, row.len())));
        }
        let frame: usize = parse_field(path, line_no, row[0], "frame index")?;
        let mut vector = Vec::with_capacity(dim);
        for v in &row[1..] {
            vector.push(parse_field(path, line_no, v, "descriptor value")?);
        }
        out.push(LocalDescriptor { frame_index: frame, vector });
    }
    Ok(out)
}

const SEGMENTS_HEADER: &str = "start_frame,end_frame,key_frame";

pub fn write_segments_csv(path: &Path, segments: &[Segment]) -> Result<(), IoError> {
    let mut text = String::from(SEGMENTS_HEADER);
    text.push('\n');
    for s in segments {
        writeln!(text, "{},{},{}", s.start_frame, s.end_frame, s.key_frame).unwrap();
    }
    atomic_write(path, text.as_bytes())
}

pub fn read_segments_csv(path: &Path) -> Result<Vec<Segment>, IoError> {
    let mut out = Vec::new();
    for (line, row) in read_csv(path, SEGMENTS_HEADER)? {
        expect_width(path, line, &row, 3)?;
        let segment = Segment {
            start_frame: parse_field(path, line, &row[0], "start frame")?,
            end_frame: parse_field(path, line, &row[1], "end frame")?,
            key_frame: parse_field(path, line, &row[2], "key frame")?,
        };
        if segment.start_frame > segment.end_frame {
            return Err(parse_err(path, line, "segment start after end"));
        }
        out.push(segment);
    }
    Ok(out)
}

/// One observation vector per segment. Column names carry the layout:
/// `{descriptor}_{index}` in layout order, so the reader can rebuild the
/// per-descriptor slices.
pub fn write_observations_csv(path: &Path, observations: &[ObservationVector]) -> Result<(), IoError> {
    let mut text = String::from("segment");
    if let Some(first) = observations.first() {
        for entry in &first.layout {
            for i in 0..entry.len {
                write!(text, ",{}_{}", entry.name, i).unwrap();
            }
        }
    }
    text.push('\n');
    for (segment, obs) in observations.iter().enumerate() {
        write!(text, "{}", segment).unwrap();
        for v in &obs.values {
            write!(text, ",{}", v).unwrap();
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

pub fn read_observations_csv(path: &Path) -> Result<Vec<ObservationVector>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let columns: Vec<&str> = header.split(',').collect();
    if columns.first() != Some(&"segment") {
        return Err(parse_err(path, 1, "expected first column `segment`"));
    }
    // Rebuild the layout by grouping consecutive `{name}_{i}` columns.
    let mut layout: Vec<DescriptorLayout> = Vec::new();
    for (offset, column) in columns[1..].iter().enumerate() {
        let (name, index) = column
            .rsplit_once('_')
            .ok_or_else(|| parse_err(path, 1, format!("malformed column `{}`", column)))?;
        let index: usize = index
            .parse()
            .map_err(|_| parse_err(path, 1, format!("malformed column `{}`", column)))?;
        match layout.last_mut() {
            Some(entry) if entry.name == name && index == entry.len => entry.len += 1,
            _ if index == 0 => {
                layout.push(DescriptorLayout { name: name.to_string(), offset, len: 1 })
            }
            _ => return Err(parse_err(path, 1, format!("column `{}` out of sequence", column))),
        }
    }
    let dim = columns.len() - 1;
    let mut out = Vec::new();
    for (index, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = index + 1;
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != dim + 1 {
            return Err(parse_err(path, line_no, format!("expected {} fields, found {}", dim + 1, row.len())));
        }
        let segment: usize = parse_field(path, line_no, row[0], "segment index")?;
        if segment != out.len() {
            return Err(parse_err(path, line_no, format!("expected segment {}, found {}", out.len(), segment)));
        }
        let mut values = Vec::with_capacity(dim);
        for v in &row[1..] {
            values.push(parse_field(path, line_no, v, "observation value")?);
        }
        out.push(ObservationVector { values, layout: layout.clone() });
    }
    Ok(out)
}

const DECODED_HEADER: &str = "segment,start_frame,end_frame,activity,state";

/// Decoded activity per segment, with the segment bounds inlined so the
/// file reads as a standalone timeline.
pub fn write_decoded_csv(
    path: &Path,
    segments: &[Segment],
    labels: &[String],
    states: &[usize],
) -> Result<(), IoError> {
    assert_eq!(segments.len(), labels.len());
    assert_eq!(segments.len(), states.len());
    let mut text = String::from(DECODED_HEADER);
    text.push('\n');
    for (i, ((segment, label), state)) in segments.iter().zip(labels).zip(states).enumerate() {
        writeln!(text, "{},{},{},{},{}", i, segment.start_frame, segment.end_frame, label, state)
            .unwrap();
    }
    atomic_write(path, text.as_bytes())
}

/// Returns `(label, state)` per segment in order.
pub fn read_decoded_csv(path: &Path) -> Result<Vec<(String, usize)>, IoError> {
    let mut out = Vec::new();
    for (line, row) in read_csv(path, DECODED_HEADER)? {
        expect_width(path, line, &row, 5)?;
        let segment: usize = parse_field(path, line, &row[0], "segment index")?;
        if segment != out.len() {
            return Err(parse_err(path, line, format!("expected segment {}, found {}", out.len(), segment)));
        }
        let state: usize = parse_field(path, line, &row[4], "state")?;
        out.push((row[3].clone(), state));
    }
    Ok(out)
}

/// Raw confusion counts: one row per ground-truth class, one column per
/// predicted class.
pub fn write_confusion_csv(
    path: &Path,
    cm: &ConfusionMatrix,
    class_labels: &[String],
) -> Result<(), IoError> {
    assert_eq!(class_labels.len(), cm.n_classes());
    let mut text = String::from("truth");
    for label in class_labels {
        write!(text, ",{}", label).unwrap();
    }
    text.push('\n');
    for (i, row) in cm.counts.iter().enumerate() {
        write!(text, "{}", class_labels[i]).unwrap();
        for count in row {
            write!(text, ",{}", count).unwrap();
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// Row-stochastic rendering of the confusion matrix.
pub fn write_confusion_normalized_csv(
    path: &Path,
    cm: &ConfusionMatrix,
    class_labels: &[String],
) -> Result<(), IoError> {
    assert_eq!(class_labels.len(), cm.n_classes());
    let mut text = String::from("truth");
    for label in class_labels {
        write!(text, ",{}", label).unwrap();
    }
    text.push('\n');
    for (i, row) in cm.normalized_rows().iter().enumerate() {
        write!(text, "{}", class_labels[i]).unwrap();
        for value in row {
            write!(text, ",{}", value).unwrap();
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// Binary PPM (P6) with an 8-bit channel depth.
pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<(), IoError> {
    let mut bytes = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    bytes.reserve(image.pixels.len() * 3);
    for px in &image.pixels {
        bytes.extend_from_slice(px);
    }
    atomic_write(path, &bytes)
}

/// Reads a P6 file with a 255 maxval. Header tokens may be separated by any
/// whitespace and `#` comments; exactly one whitespace byte separates the
/// maxval from the pixel data.
pub fn read_ppm(path: &Path) -> Result<RgbImage, IoError> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String, IoError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token(&bytes)? != "P6" {
        return Err(format_err(path, "not a P6 file"));
    }
    let width: usize = token(&bytes)?
        .parse()
        .map_err(|_| format_err(path, "bad width"))?;
    let height: usize = token(&bytes)?
        .parse()
        .map_err(|_| format_err(path, "bad height"))?;
    let maxval: usize = token(&bytes)?
        .parse()
        .map_err(|_| format_err(path, "bad maxval"))?;
    if maxval != 255 {
        return Err(format_err(path, format!("unsupported maxval {}", maxval)));
    }
    let data_start = pos + 1;
    let needed = width * height * 3;
    if bytes.len() < data_start + needed {
        return Err(format_err(path, "truncated pixel data"));
    }
    let mut image = RgbImage::new(width, height);
    for (i, chunk) in bytes[data_start..data_start + needed].chunks_exact(3).enumerate() {
        image.pixels[i] = [chunk[0], chunk[1], chunk[2]];
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn atomic_write_replaces_the_target_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec!["out.txt".to_string()]);
    }

    #[test]
    fn ppm_round_trip_preserves_every_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let mut image = RgbImage::new(13, 7);
        for px in image.pixels.iter_mut() {
            *px = [rng.gen(), rng.gen(), rng.gen()];
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame.ppm");
        write_ppm(&path, &image).unwrap();
        assert_eq!(read_ppm(&path).unwrap(), image);
    }

    #[test]
    fn ppm_rejects_foreign_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ppm");
        fs::write(&path, b"P5\n2 2\n255\n0000").unwrap();
        assert!(read_ppm(&path).is_err());
    }

    #[test]
    fn block_motion_round_trip_regroups_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let fields: Vec<BlockMotionField> = (1..5)
            .map(|frame| BlockMotionField {
                frame_index: frame,
                width: 64,
                height: 48,
                vectors: (0..6)
                    .map(|_| BlockMotionVector {
                        cx: rng.gen_range(0.0..64.0),
                        cy: rng.gen_range(0.0..48.0),
                        dx: rng.gen_range(-3.0..3.0),
                        dy: rng.gen_range(-3.0..3.0),
                    })
                    .collect(),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("block_motion.csv");
        write_block_motion_csv(&path, &fields).unwrap();
        let back = read_block_motion_csv(&path, 64, 48).unwrap();
        assert_eq!(back.len(), fields.len());
        for (a, b) in back.iter().zip(&fields) {
            assert_eq!(a.frame_index, b.frame_index);
            assert_eq!(a.width, 64);
            assert_eq!(a.vectors.len(), b.vectors.len());
            for (va, vb) in a.vectors.iter().zip(&b.vectors) {
                // Shortest round-trip decimals reproduce the exact bits.
                assert_eq!(va.cx, vb.cx);
                assert_eq!(va.dx, vb.dx);
                assert_eq!(va.dy, vb.dy);
            }
        }
    }

    #[test]
    fn affine_and_segment_round_trips_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let motions = vec![
            (1, AffineMotion { tx: 0.1, ty: -2.5, xx: 1e-3, xy: 0.0, yx: -1e-9, yy: 0.25 }),
            (2, AffineMotion::IDENTITY),
        ];
        let path = dir.path().join("affine.csv");
        write_affine_csv(&path, &motions).unwrap();
        assert_eq!(read_affine_csv(&path).unwrap(), motions);

        let segments = vec![Segment::new(0, 9), Segment::new(10, 24)];
        let spath = dir.path().join("segments.csv");
        write_segments_csv(&spath, &segments).unwrap();
        assert_eq!(read_segments_csv(&spath).unwrap(), segments);
    }

    #[test]
    fn labels_round_trip_and_contiguity_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let labels: Vec<String> = ["walk", "walk", "read"].iter().map(|s| s.to_string()).collect();
        write_labels_csv(&path, "activity", &labels).unwrap();
        assert_eq!(read_labels_csv(&path, "activity").unwrap(), labels);
        // A gap in the frame column is a parse error.
        fs::write(&path, "frame,activity\n0,walk\n2,read\n").unwrap();
        let err = read_labels_csv(&path, "activity").unwrap_err();
        assert!(err.to_string().contains("expected frame 1"));
    }

    #[test]
    fn descriptor_round_trip_keeps_frames_and_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let descriptors: Vec<LocalDescriptor> = (0..10)
            .map(|i| LocalDescriptor {
                frame_index: i * 5,
                vector: (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("descriptors.csv");
        write_descriptor_csv(&path, &descriptors).unwrap();
        assert_eq!(read_descriptor_csv(&path).unwrap(), descriptors);
    }

    #[test]
    fn observations_round_trip_rebuilds_the_layout() {
        let layout = vec![
            DescriptorLayout { name: "cut".into(), offset: 0, len: 2 },
            DescriptorLayout { name: "loc".into(), offset: 2, len: 3 },
        ];
        let observations: Vec<ObservationVector> = (0..4)
            .map(|i| ObservationVector {
                values: (0..5).map(|j| (i * 5 + j) as f64 / 7.0).collect(),
                layout: layout.clone(),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("observations.csv");
        write_observations_csv(&path, &observations).unwrap();
        assert_eq!(read_observations_csv(&path).unwrap(), observations);
    }

    #[test]
    fn decoded_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decoded.csv");
        let segments = vec![Segment::new(0, 7), Segment::new(8, 15)];
        let labels = vec!["walk".to_string(), "read".to_string()];
        let states = vec![0, 4];
        write_decoded_csv(&path, &segments, &labels, &states).unwrap();
        assert_eq!(
            read_decoded_csv(&path).unwrap(),
            vec![("walk".to_string(), 0), ("read".to_string(), 4)]
        );
    }

    #[test]
    fn json_round_trip_uses_atomic_writes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("value.json");
        let value = vec![1.5f64, -2.25, 1e-9];
        write_json(&path, &value).unwrap();
        let back: Vec<f64> = read_json(&path).unwrap();
        assert_eq!(back, value);
    }

    #[test]
    fn confusion_csv_lists_counts_per_truth_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("confusion.csv");
        let cm = ConfusionMatrix { counts: vec![vec![3, 1], vec![0, 4]] };
        let labels = vec!["a".to_string(), "b".to_string()];
        write_confusion_csv(&path, &cm, &labels).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "truth,a,b\na,3,1\nb,0,4\n");
        let npath = dir.path().join("confusion_normalized.csv");
        write_confusion_normalized_csv(&npath, &cm, &labels).unwrap();
        let ntext = fs::read_to_string(&npath).unwrap();
        assert_eq!(ntext, "truth,a,b\na,0.75,0.25\nb,0,1\n");
    }

    #[test]
    fn header_mismatch_is_reported_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("segments.csv");
        fs::write(&path, "wrong,header\n0,1\n").unwrap();
        let err = read_segments_csv(&path).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }));
        fs::write(&path, "start_frame,end_frame,key_frame\n0,x,1\n").unwrap();
        let err = read_segments_csv(&path).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }));
    }
}
