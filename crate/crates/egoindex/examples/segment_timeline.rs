//! Segment a scripted motion timeline: steady panning accumulates corner
//! displacement until a cut fires, while near-still stretches coast along
//! and only split when slow zoom and rotation add up.

use egoindex::motion::{cut_frames, segment_video, AffineMotion};

fn main() {
    let (width, height) = (320.0, 240.0);
    let mut motions = vec![AffineMotion::IDENTITY]; // frame 0 has no incoming motion

    // 0..120: walking with a strong horizontal pan.
    for _ in 0..120 {
        motions.push(AffineMotion { tx: 6.0, ty: 0.3, ..AffineMotion::IDENTITY });
    }
    // 120..240: sitting, slow zoom out.
    for _ in 0..120 {
        motions.push(AffineMotion { xx: 0.004, yy: 0.004, ..AffineMotion::IDENTITY });
    }
    // 240..360: climbing stairs, vertical motion.
    for _ in 0..120 {
        motions.push(AffineMotion { tx: 0.4, ty: 7.0, ..AffineMotion::IDENTITY });
    }

    let segments = segment_video(&motions, width, height, 0.2, 5).unwrap();
    println!("{} frames -> {} segments", motions.len(), segments.len());
    for (i, s) in segments.iter().enumerate() {
        println!(
            "segment {:>2}: frames {:>3}..={:<3} ({} frames), key frame {}",
            i,
            s.start_frame,
            s.end_frame,
            s.len(),
            s.key_frame
        );
    }

    let cuts = cut_frames(&segments);
    println!();
    println!("cut frames: {:?}", cuts);
    println!(
        "panning cuts roughly every {:.0} frames; the zoom stretch holds \
         much longer before its corners drift past the threshold",
        0.2 * width / 6.0
    );
}
