//! Generate the seven-activity synthetic dataset and walk through what it
//! contains: frames, block motion, local descriptors, and labels.

use egoindex::io;
use egoindex::pipeline::Dataset;
use egoindex::synth::{synth_generate, ScenarioScript};

fn main() {
    let out = std::env::temp_dir().join("egoindex-synth-example");
    let script = ScenarioScript::seven_activities(7);
    let manifest = synth_generate(&script, 7, &out).unwrap();

    println!("dataset root: {}", out.display());
    println!(
        "{} frames at {}x{} ({:.1} fps, {:.1} minutes)",
        manifest.n_frames,
        manifest.width,
        manifest.height,
        manifest.frame_rate,
        manifest.n_frames as f64 / manifest.frame_rate / 60.0
    );
    println!("activities: {}", manifest.activity_names.join(", "));
    println!("locations:  {}", manifest.location_names.join(", "));

    let ds = Dataset::load(&out.join("manifest.json")).unwrap();
    let activities = ds.frame_activities().unwrap();
    println!();
    println!("ground-truth timeline (first transitions):");
    let mut start = 0;
    let mut shown = 0;
    for f in 1..=activities.len() {
        if f == activities.len() || activities[f] != activities[start] {
            println!(
                "  frames {:>5}..{:<5} {}",
                start,
                f - 1,
                manifest.activity_names[activities[start]]
            );
            start = f;
            shown += 1;
            if shown == 8 {
                println!("  ...");
                break;
            }
        }
    }

    let motions = io::read_affine_csv(&out.join(manifest.true_motion.as_deref().unwrap())).unwrap();
    let (frame, motion) = &motions[0];
    println!();
    println!("scripted motion into frame {}: {:?}", frame, motion);

    let image = io::read_ppm(&manifest.frame_path(&out, 0)).unwrap();
    println!("frame 0: {}x{} pixels, first pixel {:?}", image.width, image.height, image.pixel(0, 0));
}
