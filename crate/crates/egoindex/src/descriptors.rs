//! Per-segment descriptors: cut histogram, translation-energy histogram,
//! color layout of the key frame, and their assembly into observation
//! vectors.
//!
//! Each descriptor summarizes one temporal segment. The cut histogram counts
//! recent segmentation cuts over dyadic windows and captures the rhythm of
//! camera motion; the translation-energy histogram bins the log energy of the
//! per-frame translation estimates; the color layout keeps the first DCT
//! coefficients of the key frame in YCbCr. Observation vectors concatenate
//! any subset of the descriptors in a fixed canonical order.

use crate::motion::AffineMotion;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while computing or assembling descriptors.
#[derive(Debug, Error)]
pub enum DescriptorError {
    /// A per-segment operation received no frames.
    #[error("segment contains no frames")]
    EmptySegment,
    /// The key frame is smaller than the 8x8 block grid.
    #[error("image {width}x{height} is smaller than the 8x8 block grid")]
    ImageTooSmall { width: usize, height: usize },
    /// The feature configuration selects a descriptor the segment lacks.
    #[error("descriptor '{0}' selected but not present for this segment")]
    MissingDescriptor(&'static str),
    /// The feature configuration selects nothing.
    #[error("feature configuration selects no descriptors")]
    EmptyConfig,
}

/// An 8-bit RGB raster, row major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `width * height` pixels, row major, `[r, g, b]` each.
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    /// Creates a black image.
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage { width, height, pixels: vec![[0, 0, 0]; width * height] }
    }

    /// Creates an image filled with one color.
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        RgbImage { width, height, pixels: vec![color; width * height] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, color: [u8; 3]) {
        self.pixels[y * self.width + x] = color;
    }
}

/// Averaged counts of segmentation cuts over nested dyadic windows.
///
/// Bin `i` (1-based) of the per-frame histogram counts the cuts within the
/// `2^i` frames preceding the frame; the segment histogram is the mean over
/// the segment's frames. Nested windows make the bins monotone
/// non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutHistogram {
    pub bins: Vec<f64>,
}

/// Per-parameter histograms of the translation log energy.
///
/// For each frame the energy `ln(a^2)` of the horizontal and vertical
/// translation estimates is binned with step `step`; each parameter's
/// histogram is normalized by the frame count so it sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpeHistogram {
    pub bins_tx: Vec<f64>,
    pub bins_ty: Vec<f64>,
    pub step: f64,
}

/// The first zigzag-ordered DCT coefficients of the key frame in YCbCr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorLayout {
    pub y_coeffs: [f64; 6],
    pub cb_coeffs: [f64; 3],
    pub cr_coeffs: [f64; 3],
}

impl ColorLayout {
    /// All 12 coefficients in canonical order: Y, Cb, Cr.
    pub fn coefficients(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[..6].copy_from_slice(&self.y_coeffs);
        out[6..9].copy_from_slice(&self.cb_coeffs);
        out[9..].copy_from_slice(&self.cr_coeffs);
        out
    }

    /// Rebuilds a layout from a 12-element coefficient slice.
    pub fn from_coefficients(values: &[f64]) -> Option<Self> {
        if values.len() != 12 {
            return None;
        }
        let mut layout = ColorLayout { y_coeffs: [0.0; 6], cb_coeffs: [0.0; 3], cr_coeffs: [0.0; 3] };
        layout.y_coeffs.copy_from_slice(&values[..6]);
        layout.cb_coeffs.copy_from_slice(&values[6..9]);
        layout.cr_coeffs.copy_from_slice(&values[9..]);
        Some(layout)
    }
}

/// Selects which descriptors enter the observation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub cut_histogram: bool,
    pub tpe_histogram: bool,
    pub color_layout: bool,
    pub localization_histogram: bool,
}

impl FeatureConfig {
    pub const ALL: FeatureConfig = FeatureConfig {
        cut_histogram: true,
        tpe_histogram: true,
        color_layout: true,
        localization_histogram: true,
    };

    pub fn any(&self) -> bool {
        self.cut_histogram || self.tpe_histogram || self.color_layout || self.localization_histogram
    }

    /// Short names of the selected descriptors in canonical order.
    pub fn selected_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.cut_histogram {
            names.push("cut");
        }
        if self.tpe_histogram {
            names.push("tpe");
        }
        if self.color_layout {
            names.push("cld");
        }
        if self.localization_histogram {
            names.push("loc");
        }
        names
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig::ALL
    }
}

/// All descriptors computed for one segment; fields are optional so partial
/// extraction stages can fill them in independently.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentDescriptors {
    pub cut: Option<CutHistogram>,
    pub tpe: Option<TpeHistogram>,
    pub color_layout: Option<ColorLayout>,
    pub localization: Option<Vec<f64>>,
}

/// Position of one descriptor inside a flat observation vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorLayout {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// A flat per-segment observation with layout metadata describing which
/// slice belongs to which descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector {
    pub values: Vec<f64>,
    pub layout: Vec<DescriptorLayout>,
}

impl ObservationVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The slice holding the named descriptor, if present.
    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .iter()
            .find(|entry| entry.name == name)
            .map(|entry| &self.values[entry.offset..entry.offset + entry.len])
    }
}

/// Counts segmentation cuts over the dyadic windows preceding `frame`.
///
/// Bin `i` (1-based) counts cut frames `c` with `frame - 2^i <= c < frame`;
/// the current frame is excluded. `cut_frames` must be sorted ascending.
pub fn cut_histogram_frame(cut_frames: &[usize], frame: usize, n_bins: usize) -> Vec<f64> {
    assert!(n_bins >= 1, "cut histogram needs at least one bin");
    let frame = frame as i64;
    (1..=n_bins)
        .map(|i| {
            let lo = frame - (1i64 << i);
            let begin = cut_frames.partition_point(|&c| (c as i64) < lo);
            let end = cut_frames.partition_point(|&c| (c as i64) < frame);
            (end - begin) as f64
        })
        .collect()
}

/// Averages per-frame cut histograms over a segment.
pub fn cut_histogram_segment(per_frame: &[Vec<f64>]) -> Result<CutHistogram, DescriptorError> {
    let first = per_frame.first().ok_or(DescriptorError::EmptySegment)?;
    let n_bins = first.len();
    let mut bins = vec![0.0; n_bins];
    for hist in per_frame {
        assert_eq!(hist.len(), n_bins, "per-frame histograms must share a bin count");
        for (acc, v) in bins.iter_mut().zip(hist) {
            *acc += v;
        }
    }
    let n = per_frame.len() as f64;
    for b in bins.iter_mut() {
        *b /= n;
    }
    Ok(CutHistogram { bins })
}

/// Bin index (1-based) for a log energy `v` with `n_bins` bins of width
/// `step`. Values below `step` land in bin 1, values at or beyond
/// `(n_bins - 1) * step` land in the top bin; interior bins are half-open.
fn energy_bin(v: f64, n_bins: usize, step: f64) -> usize {
    let raw = (v / step).floor() + 1.0;
    raw.clamp(1.0, n_bins as f64) as usize
}

/// Histograms of the translation log energy `ln(a^2)` over one segment.
///
/// Each of the two translation parameters is binned independently per frame
/// and the counts are divided by the frame count, so both histograms are
/// probability distributions. A zero translation has log energy negative
/// infinity and lands in bin 1.
pub fn tpe_histogram(
    motions: &[AffineMotion],
    n_bins: usize,
    step: f64,
) -> Result<TpeHistogram, DescriptorError> {
    assert!(n_bins >= 2, "energy histogram needs at least two bins");
    assert!(step > 0.0, "energy bin width must be positive");
    if motions.is_empty() {
        return Err(DescriptorError::EmptySegment);
    }
    let mut bins_tx = vec![0.0; n_bins];
    let mut bins_ty = vec![0.0; n_bins];
    for m in motions {
        bins_tx[energy_bin((m.tx * m.tx).ln(), n_bins, step) - 1] += 1.0;
        bins_ty[energy_bin((m.ty * m.ty).ln(), n_bins, step) - 1] += 1.0;
    }
    let n = motions.len() as f64;
    for b in bins_tx.iter_mut().chain(bins_ty.iter_mut()) {
        *b /= n;
    }
    Ok(TpeHistogram { bins_tx, bins_ty, step })
}

/// Full-range BT.601 conversion from RGB to YCbCr, with chroma offset 128.
pub fn rgb_to_ycbcr(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 0.5 / (1.0 - 0.114) * (b - y) + 128.0;
    let cr = 0.5 / (1.0 - 0.299) * (r - y) + 128.0;
    (y, cb, cr)
}

/// Orthonormal 2-D DCT-II of an 8x8 block, computed separably.
///
/// The 1-D transform is factored over the input's symmetric pairs: even
/// coefficients read only pair sums and odd coefficients only pair
/// differences, so a constant input yields exact zeros at every nonzero
/// frequency rather than rounding residue.
pub fn dct_8x8(block: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    fn dct_1d(input: &[f64; 8]) -> [f64; 8] {
        use std::f64::consts::PI;
        let mut sums = [0.0; 4];
        let mut diffs = [0.0; 4];
        for n in 0..4 {
            sums[n] = input[n] + input[7 - n];
            diffs[n] = input[n] - input[7 - n];
        }
        let ee = [sums[0] + sums[3], sums[1] + sums[2]];
        let eo = [sums[0] - sums[3], sums[1] - sums[2]];
        let mut out = [0.0; 8];
        out[0] = (1.0f64 / 8.0).sqrt() * (ee[0] + ee[1]);
        out[4] = 0.5 * (PI / 4.0).cos() * (ee[0] - ee[1]);
        out[2] = 0.5 * ((PI / 8.0).cos() * eo[0] + (3.0 * PI / 8.0).cos() * eo[1]);
        out[6] = 0.5 * ((3.0 * PI / 8.0).cos() * eo[0] - (PI / 8.0).cos() * eo[1]);
        for u in [1usize, 3, 5, 7] {
            let mut acc = 0.0;
            for (n, &d) in diffs.iter().enumerate() {
                acc += d * ((2 * n + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
            out[u] = 0.5 * acc;
        }
        out
    }

    let mut rows = [[0.0; 8]; 8];
    for (r, row) in block.iter().enumerate() {
        rows[r] = dct_1d(row);
    }
    let mut out = [[0.0; 8]; 8];
    for c in 0..8 {
        let mut col = [0.0; 8];
        for r in 0..8 {
            col[r] = rows[r][c];
        }
        let transformed = dct_1d(&col);
        for r in 0..8 {
            out[r][c] = transformed[r];
        }
    }
    out
}

/// The 64 `(row, col)` positions of an 8x8 block in JPEG zigzag order.
pub fn zigzag_indices() -> [(usize, usize); 64] {
    let mut order = [(0usize, 0usize); 64];
    let mut k = 0;
    for d in 0..15usize {
        let lo = d.saturating_sub(7);
        let hi = d.min(7);
        if d % 2 == 1 {
            for row in lo..=hi {
                order[k] = (row, d - row);
                k += 1;
            }
        } else {
            for row in (lo..=hi).rev() {
                order[k] = (row, d - row);
                k += 1;
            }
        }
    }
    order
}

/// Per-channel 8x8 block means of an image, with remainder pixels absorbed
/// into the last row and column of blocks.
fn block_means(image: &RgbImage) -> [[[f64; 8]; 8]; 3] {
    let base_w = image.width / 8;
    let base_h = image.height / 8;
    let mut means = [[[0.0f64; 8]; 8]; 3];
    for by in 0..8 {
        let y0 = by * base_h;
        let y1 = if by == 7 { image.height } else { (by + 1) * base_h };
        for bx in 0..8 {
            let x0 = bx * base_w;
            let x1 = if bx == 7 { image.width } else { (bx + 1) * base_w };
            let mut sums = [0.0f64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = image.pixel(x, y);
                    for (s, &v) in sums.iter_mut().zip(p.iter()) {
                        *s += v as f64;
                    }
                }
            }
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            for (c, s) in sums.iter().enumerate() {
                means[c][by][bx] = s / count;
            }
        }
    }
    means
}

/// Computes the color layout of a key frame.
///
/// The image is reduced to an 8x8 grid of per-block RGB means, converted to
/// YCbCr, and transformed with the orthonormal DCT; the first 6 (Y) and 3
/// (Cb, Cr) zigzag-ordered coefficients are kept unquantized.
pub fn color_layout(image: &RgbImage) -> Result<ColorLayout, DescriptorError> {
    if image.width < 8 || image.height < 8 {
        return Err(DescriptorError::ImageTooSmall { width: image.width, height: image.height });
    }
    let rgb = block_means(image);
    let mut y_block = [[0.0; 8]; 8];
    let mut cb_block = [[0.0; 8]; 8];
    let mut cr_block = [[0.0; 8]; 8];
    for row in 0..8 {
        for col in 0..8 {
            let (y, cb, cr) = rgb_to_ycbcr(rgb[0][row][col], rgb[1][row][col], rgb[2][row][col]);
            y_block[row][col] = y;
            cb_block[row][col] = cb;
            cr_block[row][col] = cr;
        }
    }
    let order = zigzag_indices();
    let pick = |block: &[[f64; 8]; 8], n: usize| -> Vec<f64> {
        order[..n].iter().map(|&(r, c)| block[r][c]).collect()
    };
    let y_dct = dct_8x8(&y_block);
    let cb_dct = dct_8x8(&cb_block);
    let cr_dct = dct_8x8(&cr_block);
    let mut layout = ColorLayout { y_coeffs: [0.0; 6], cb_coeffs: [0.0; 3], cr_coeffs: [0.0; 3] };
    layout.y_coeffs.copy_from_slice(&pick(&y_dct, 6));
    layout.cb_coeffs.copy_from_slice(&pick(&cb_dct, 3));
    layout.cr_coeffs.copy_from_slice(&pick(&cr_dct, 3));
    Ok(layout)
}

/// Concatenates the selected descriptors of a segment in canonical order
/// (cut, tpe, cld, loc) and records the layout of each slice.
pub fn assemble_observation(
    descriptors: &SegmentDescriptors,
    config: &FeatureConfig,
) -> Result<ObservationVector, DescriptorError> {
    if !config.any() {
        return Err(DescriptorError::EmptyConfig);
    }
    let mut values = Vec::new();
    let mut layout = Vec::new();
    let mut push = |name: &'static str, slice: &[f64]| {
        layout.push(DescriptorLayout { name: name.to_string(), offset: values.len(), len: slice.len() });
        values.extend_from_slice(slice);
    };
    if config.cut_histogram {
        let cut = descriptors.cut.as_ref().ok_or(DescriptorError::MissingDescriptor("cut"))?;
        push("cut", &cut.bins);
    }
    if config.tpe_histogram {
        let tpe = descriptors.tpe.as_ref().ok_or(DescriptorError::MissingDescriptor("tpe"))?;
        let mut both = tpe.bins_tx.clone();
        both.extend_from_slice(&tpe.bins_ty);
        push("tpe", &both);
    }
    if config.color_layout {
        let cld = descriptors
            .color_layout
            .as_ref()
            .ok_or(DescriptorError::MissingDescriptor("cld"))?;
        push("cld", &cld.coefficients());
    }
    if config.localization_histogram {
        let loc = descriptors
            .localization
            .as_ref()
            .ok_or(DescriptorError::MissingDescriptor("loc"))?;
        push("loc", loc);
    }
    Ok(ObservationVector { values, layout })
}
