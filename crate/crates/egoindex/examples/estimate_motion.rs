//! Estimate an affine global-motion model from a noisy block motion field,
//! with and without robust reweighting, and compare both against the truth.

use egoindex::motion::{estimate_affine, AffineMotion, BlockMotionField, BlockMotionVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let truth = AffineMotion { tx: 2.5, ty: -1.0, xx: 0.01, xy: -0.004, yx: 0.003, yy: 0.008 };
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // A 20x15 macroblock grid for a 320x240 frame; one vector in eight is
    // replaced by clutter, as if a foreground object crossed the view.
    let mut vectors = Vec::new();
    for by in 0..15 {
        for bx in 0..20 {
            let cx = (bx * 16 + 8) as f64;
            let cy = (by * 16 + 8) as f64;
            let (dx, dy) = if rng.gen::<f64>() < 0.125 {
                (rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0))
            } else {
                let d = truth.displacement_at(cx, cy);
                (d.0 + rng.gen_range(-0.05..0.05), d.1 + rng.gen_range(-0.05..0.05))
            };
            vectors.push(BlockMotionVector { cx, cy, dx, dy });
        }
    }
    let field = BlockMotionField { frame_index: 1, width: 320, height: 240, vectors };

    let plain = estimate_affine(&field, false).unwrap();
    let robust = estimate_affine(&field, true).unwrap();

    let error = |m: &AffineMotion| {
        let d = [
            m.tx - truth.tx,
            m.ty - truth.ty,
            m.xx - truth.xx,
            m.xy - truth.xy,
            m.yx - truth.yx,
            m.yy - truth.yy,
        ];
        d.iter().map(|e| e * e).sum::<f64>().sqrt()
    };

    println!("truth:           {:?}", truth);
    println!("least squares:   {:?}  (parameter error {:.4})", plain, error(&plain));
    println!("robust IRLS:     {:?}  (parameter error {:.4})", robust, error(&robust));
    println!();
    println!(
        "the robust fit shrinks the parameter error by a factor of {:.0}",
        error(&plain) / error(&robust)
    );
}
