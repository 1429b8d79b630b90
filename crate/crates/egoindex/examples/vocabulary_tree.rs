//! Build a hierarchical visual vocabulary from clustered local
//! descriptors, quantize frames into tree signatures, and classify each
//! frame's location with the 1-NN model.

use egoindex::localization::{
    build_tree, classify_frame, quantize_frame, LocalDescriptor, LocationModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draws one synthetic frame: eight descriptors scattered around the
/// class's anchor points.
fn draw_frame(rng: &mut ChaCha8Rng, frame: usize, class: usize) -> Vec<LocalDescriptor> {
    (0..8)
        .map(|_| {
            let anchor = rng.gen_range(0..4);
            let vector = (0..16)
                .map(|d| 10.0 * class as f64 + anchor as f64 + 0.3 * rng.gen::<f64>() + d as f64 * 0.01)
                .collect();
            LocalDescriptor { frame_index: frame, vector }
        })
        .collect()
}

fn main() {
    let n_classes = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut train_frames = Vec::new();
    for frame in 0..30 {
        train_frames.push((frame, frame % n_classes));
    }
    let train_descriptors: Vec<LocalDescriptor> = train_frames
        .iter()
        .flat_map(|&(frame, class)| draw_frame(&mut rng, frame, class))
        .collect();

    let tree = build_tree(&train_descriptors, 4, 3, 99).unwrap();
    println!("vocabulary tree: branching 4, depth 3 -> {} nodes", tree.node_count());

    let entries = train_frames
        .iter()
        .map(|&(frame, class)| {
            let descriptors: Vec<LocalDescriptor> = train_descriptors
                .iter()
                .filter(|d| d.frame_index == frame)
                .cloned()
                .collect();
            (quantize_frame(&descriptors, &tree).unwrap(), class)
        })
        .collect();
    let model = LocationModel::new(entries, n_classes).unwrap();

    let mut correct = 0;
    let total = 60;
    for i in 0..total {
        let class = i % n_classes;
        let descriptors = draw_frame(&mut rng, 1000 + i, class);
        let signature = quantize_frame(&descriptors, &tree).unwrap();
        if classify_frame(&signature, &model).unwrap() == class {
            correct += 1;
        }
    }
    println!("classified {}/{} unseen frames correctly", correct, total);
}
