//! Generate a small synthetic dataset, segment it, and inspect the
//! per-segment descriptors: cut-frequency histogram, translation-parameter
//! energy histogram, and the color layout of the key frame.

use egoindex::config::RunConfig;
use egoindex::descriptors::{assemble_observation, FeatureConfig};
use egoindex::pipeline::{descriptor_stage, segment_stage, Dataset};
use egoindex::synth::{synth_generate, ScenarioScript};

fn main() {
    let out = std::env::temp_dir().join("egoindex-extract-example");
    let script = ScenarioScript::compact(11);
    synth_generate(&script, 11, &out).unwrap();
    println!("dataset in {}", out.display());

    let ds = Dataset::load(&out.join("manifest.json")).unwrap();
    let config = RunConfig::default();
    let seg = segment_stage(&ds, &config).unwrap();
    let raw = descriptor_stage(&ds, &config, &seg).unwrap();
    println!("{} segments", seg.segments.len());

    // Motion and color descriptors only; localization needs a trained
    // location model, so its slot stays empty here.
    let features = FeatureConfig {
        cut_histogram: true,
        tpe_histogram: true,
        color_layout: true,
        localization_histogram: false,
    };

    for (segment, descriptors) in seg.segments.iter().zip(&raw).take(4) {
        let obs = assemble_observation(descriptors, &features).unwrap();
        println!();
        println!(
            "segment {:>3}..={:<3}  key frame {}",
            segment.start_frame, segment.end_frame, segment.key_frame
        );
        for block in &obs.layout {
            let values = obs.slice(&block.name).unwrap();
            let rendered: Vec<String> = values.iter().map(|v| format!("{:.3}", v)).collect();
            println!("  {:<4} [{}]", block.name, rendered.join(", "));
        }
    }
}
