//! Global motion estimation and motion-based temporal segmentation.
//!
//! A wearable camera records one continuous shot, so there are no cuts to
//! detect. Instead the dominant image motion is fit per frame with a
//! six-parameter affine model from macro-block displacement vectors, the
//! image corners are advanced through the composed motion over time, and a
//! segment boundary is declared whenever any corner drifts further than a
//! threshold from its position at the start of the segment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from motion estimation and segmentation.
#[derive(Debug, Error)]
pub enum MotionError {
    /// The block field cannot constrain the affine model: fewer than three
    /// vectors, or all block centers collinear. Callers typically substitute
    /// the previous frame's motion.
    #[error("degenerate block field: {0}")]
    DegenerateField(String),
    /// No motions were supplied to segmentation.
    #[error("empty motion sequence")]
    EmptyInput,
}

/// Displacement of one macro-block: block center `(cx, cy)` moved by
/// `(dx, dy)` pixels relative to the previous frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMotionVector {
    pub cx: f64,
    pub cy: f64,
    pub dx: f64,
    pub dy: f64,
}

/// All block displacement vectors observed for one frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockMotionField {
    pub frame_index: usize,
    pub width: u32,
    pub height: u32,
    pub vectors: Vec<BlockMotionVector>,
}

/// Six-parameter global motion model.
///
/// The displacement predicted at image position `(x, y)` is
///
/// ```text
/// dx = tx + xx * x + xy * y
/// dy = ty + yx * x + yy * y
/// ```
///
/// `(tx, ty)` is the translation; the remaining four terms form the linear
/// deformation (zoom, rotation, shear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMotion {
    pub tx: f64,
    pub ty: f64,
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

impl AffineMotion {
    pub const IDENTITY: AffineMotion = AffineMotion {
        tx: 0.0,
        ty: 0.0,
        xx: 0.0,
        xy: 0.0,
        yx: 0.0,
        yy: 0.0,
    };

    pub fn new(tx: f64, ty: f64, xx: f64, xy: f64, yx: f64, yy: f64) -> Self {
        Self { tx, ty, xx, xy, yx, yy }
    }

    /// Displacement predicted at `(x, y)`.
    pub fn displacement_at(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.tx + self.xx * x + self.xy * y,
            self.ty + self.yx * x + self.yy * y,
        )
    }

    /// Maps `(x, y)` to its position after the motion: `p + t + A p`.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = self.displacement_at(x, y);
        (x + dx, y + dy)
    }

    /// The motion that undoes this one, if `I + A` is invertible.
    ///
    /// Satisfies `inv.apply(self.apply(p)) == p` up to rounding.
    pub fn inverse(&self) -> Option<AffineMotion> {
        // p' = (I + A) p + t, so the inverse map is (I + A)^-1 (p' - t).
        let m00 = 1.0 + self.xx;
        let m01 = self.xy;
        let m10 = self.yx;
        let m11 = 1.0 + self.yy;
        let det = m00 * m11 - m01 * m10;
        if det.abs() < 1e-12 {
            return None;
        }
        let i00 = m11 / det;
        let i01 = -m01 / det;
        let i10 = -m10 / det;
        let i11 = m00 / det;
        Some(AffineMotion {
            xx: i00 - 1.0,
            xy: i01,
            yx: i10,
            yy: i11 - 1.0,
            tx: -(i00 * self.tx + i01 * self.ty),
            ty: -(i10 * self.tx + i11 * self.ty),
        })
    }

    pub fn is_finite(&self) -> bool {
        [self.tx, self.ty, self.xx, self.xy, self.yx, self.yy]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Positions of the four image corners, tracked through composed motion.
///
/// Corners start at the image rectangle and every advance moves each corner
/// by the displacement the motion predicts at its current absolute position.
/// Displacements are reported relative to the positions held when the state
/// was created (the segment start), so a fresh state reports zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerState {
    start: [(f64, f64); 4],
    current: [(f64, f64); 4],
}

impl CornerState {
    /// Corners at rest on the image rectangle `(0,0) .. (width,height)`.
    pub fn new(width: f64, height: f64) -> Self {
        let corners = [(0.0, 0.0), (width, 0.0), (0.0, height), (width, height)];
        Self { start: corners, current: corners }
    }

    /// Per-corner displacement from the segment-start position.
    pub fn displacements(&self) -> [(f64, f64); 4] {
        let mut out = [(0.0, 0.0); 4];
        for (i, (s, c)) in self.start.iter().zip(self.current.iter()).enumerate() {
            out[i] = (c.0 - s.0, c.1 - s.1);
        }
        out
    }

    /// Largest Euclidean displacement over the four corners.
    pub fn max_displacement(&self) -> f64 {
        self.displacements()
            .iter()
            .map(|(dx, dy)| (dx * dx + dy * dy).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Advances each corner through one frame of global motion.
pub fn advance_corners(state: &CornerState, motion: &AffineMotion) -> CornerState {
    let mut next = *state;
    for corner in next.current.iter_mut() {
        *corner = motion.apply(corner.0, corner.1);
    }
    next
}

/// A maximal run of frames whose corner trajectories stay inside the cut
/// threshold. Inclusive bounds; the key frame is the temporal center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub key_frame: usize,
}

impl Segment {
    pub fn new(start_frame: usize, end_frame: usize) -> Self {
        debug_assert!(start_frame <= end_frame);
        Self { start_frame, end_frame, key_frame: key_frame_of(start_frame, end_frame) }
    }

    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        frame >= self.start_frame && frame <= self.end_frame
    }
}

/// Temporal center of a segment, rounded down.
pub fn key_frame_of(start_frame: usize, end_frame: usize) -> usize {
    (start_frame + end_frame) / 2
}

/// Fits the six-parameter affine model to a block motion field by least
/// squares; with `robust` set, refines the fit with iteratively reweighted
/// least squares using the Tukey biweight so outlier blocks are ignored.
///
/// Returns `DegenerateField` when fewer than three vectors are present or
/// the block centers are collinear, in which case the caller should carry
/// the previous frame's motion forward.
pub fn estimate_affine(field: &BlockMotionField, robust: bool) -> Result<AffineMotion, MotionError> {
    if field.vectors.len() < 3 {
        return Err(MotionError::DegenerateField(format!(
            "frame {}: {} block vectors, need at least 3",
            field.frame_index,
            field.vectors.len()
        )));
    }
    let uniform = vec![1.0; field.vectors.len()];
    let mut motion = weighted_fit(&field.vectors, &uniform).ok_or_else(|| {
        MotionError::DegenerateField(format!(
            "frame {}: block centers are collinear",
            field.frame_index
        ))
    })?;

    if robust {
        motion = irls_refine(&field.vectors, motion);
    }
    Ok(motion)
}

const IRLS_MAX_ITERS: usize = 10;
const TUKEY_CONSTANT: f64 = 4.685;
// MAD-to-sigma consistency factor for normal residuals.
const MAD_SCALE: f64 = 1.4826;

fn irls_refine(vectors: &[BlockMotionVector], initial: AffineMotion) -> AffineMotion {
    let mut motion = initial;
    let mut weights = vec![1.0; vectors.len()];
    for _ in 0..IRLS_MAX_ITERS {
        let mut residuals: Vec<f64> = vectors
            .iter()
            .map(|v| {
                let (px, py) = motion.displacement_at(v.cx, v.cy);
                ((v.dx - px).powi(2) + (v.dy - py).powi(2)).sqrt()
            })
            .collect();
        let mut sorted = residuals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mad = sorted[sorted.len() / 2];
        let scale = (MAD_SCALE * mad).max(1e-12);
        let cutoff = TUKEY_CONSTANT * scale;
        for (w, r) in weights.iter_mut().zip(residuals.drain(..)) {
            *w = if r <= cutoff {
                let u = r / cutoff;
                let v = 1.0 - u * u;
                v * v
            } else {
                0.0
            };
        }
        match weighted_fit(vectors, &weights) {
            Some(next) => {
                let delta = [
                    next.tx - motion.tx,
                    next.ty - motion.ty,
                    next.xx - motion.xx,
                    next.xy - motion.xy,
                    next.yx - motion.yx,
                    next.yy - motion.yy,
                ]
                .iter()
                .map(|d| d.abs())
                .fold(0.0, f64::max);
                motion = next;
                if delta < 1e-12 {
                    break;
                }
            }
            // All mass rejected or geometry collapsed: keep the last fit.
            None => break,
        }
    }
    motion
}

/// Weighted least squares on the stacked system. The dx and dy rows share
/// no parameters, so the fit decouples into two 3-parameter normal-equation
/// solves against the same 3x3 Gram matrix.
fn weighted_fit(vectors: &[BlockMotionVector], weights: &[f64]) -> Option<AffineMotion> {
    let mut gram = [[0.0f64; 3]; 3];
    let mut rhs_x = [0.0f64; 3];
    let mut rhs_y = [0.0f64; 3];
    for (v, &w) in vectors.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let basis = [1.0, v.cx, v.cy];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] += w * basis[i] * basis[j];
            }
            rhs_x[i] += w * basis[i] * v.dx;
            rhs_y[i] += w * basis[i] * v.dy;
        }
    }
    let cx = solve3(gram, rhs_x)?;
    let cy = solve3(gram, rhs_y)?;
    Some(AffineMotion {
        tx: cx[0],
        xx: cx[1],
        xy: cx[2],
        ty: cy[0],
        yx: cy[1],
        yy: cy[2],
    })
}

/// Gaussian elimination with partial pivoting on a 3x3 system. Returns
/// `None` when the matrix is singular to working precision, which is how
/// collinear block centers surface.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let tol = 1e-12 * scale;
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot_row][col].abs() <= tol {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut sum = b[row];
        for k in (row + 1)..3 {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

/// Default cut threshold as a fraction of the image width.
pub const DEFAULT_THRESHOLD_RATIO: f64 = 0.2;
/// Default minimum segment length in frames.
pub const DEFAULT_MIN_SEGMENT_LEN: usize = 5;

/// Cuts the frame range `0..motions.len()` into segments.
///
/// `motions[f]` is the global motion observed at frame `f` (from `f-1` to
/// `f`); the entry at a segment's start frame crosses the preceding cut and
/// does not advance the corners. A cut fires as soon as any corner's
/// displacement from its segment-start position exceeds
/// `threshold_ratio * width`; the segment ends at that frame and the next
/// one starts at the following frame with corners reset to the image
/// rectangle. Segments shorter than `min_len` are merged into the following
/// segment (a trailing short segment merges backward), so every frame lands
/// in exactly one segment and, whenever `motions.len() >= min_len`, every
/// segment has at least `min_len` frames.
pub fn segment_video(
    motions: &[AffineMotion],
    width: f64,
    height: f64,
    threshold_ratio: f64,
    min_len: usize,
) -> Result<Vec<Segment>, MotionError> {
    if motions.is_empty() {
        return Err(MotionError::EmptyInput);
    }
    let threshold = threshold_ratio * width;
    let n = motions.len();

    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    let mut corners = CornerState::new(width, height);
    for (frame, motion) in motions.iter().enumerate() {
        if frame == start {
            continue;
        }
        corners = advance_corners(&corners, motion);
        if corners.max_displacement() > threshold && frame + 1 < n {
            raw.push((start, frame));
            start = frame + 1;
            corners = CornerState::new(width, height);
        }
    }
    raw.push((start, n - 1));

    Ok(merge_short(raw, min_len))
}

/// Merge-forward pass for the minimum-length rule. An undersized segment is
/// absorbed into the one after it; if the final segment comes up short it
/// folds back into its predecessor.
fn merge_short(raw: Vec<(usize, usize)>, min_len: usize) -> Vec<Segment> {
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
    let mut pending_start: Option<usize> = None;
    let mut tail_end = 0usize;
    for (start, end) in raw {
        tail_end = end;
        let start = pending_start.take().unwrap_or(start);
        if end - start + 1 >= min_len {
            merged.push((start, end));
        } else {
            pending_start = Some(start);
        }
    }
    if let Some(start) = pending_start {
        match merged.last_mut() {
            Some(last) => last.1 = tail_end,
            None => merged.push((start, tail_end)),
        }
    }
    merged
        .into_iter()
        .map(|(s, e)| Segment::new(s, e))
        .collect()
}

/// Frame ordinals at which cuts occurred: the start frame of every segment
/// after the first. These are the global cut events the cut histogram
/// counts.
pub fn cut_frames(segments: &[Segment]) -> Vec<usize> {
    segments.iter().skip(1).map(|s| s.start_frame).collect()
}
