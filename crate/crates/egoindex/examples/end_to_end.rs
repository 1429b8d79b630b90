//! Run the whole pipeline on a synthetic dataset in one call: segment,
//! extract, localize, train, decode, and score, then read the report.

use egoindex::config::RunConfig;
use egoindex::pipeline::run_pipeline;
use egoindex::synth::{synth_generate, ScenarioScript};

fn main() {
    let root = std::env::temp_dir().join("egoindex-end-to-end-example");
    let data = root.join("data");
    let out = root.join("run");

    let script = ScenarioScript::seven_activities(7);
    synth_generate(&script, 7, &data).unwrap();

    let config = RunConfig {
        mixture_components: 1, // one Gaussian per state fits the small train split
        ..RunConfig::default()
    };
    let report = run_pipeline(&data.join("manifest.json"), &config, &out).unwrap();

    println!("artifacts in {}", out.display());
    println!(
        "{} segments, {} used for training, {} held out",
        report.n_segments,
        report.n_train_segments,
        report.n_segments - report.n_train_segments
    );
    println!();
    println!(
        "held-out accuracy {:.4}, macro F {:.4}",
        report.metrics.micro_accuracy, report.metrics.macro_f_score
    );
    println!();
    println!("{:<22} {:>9} {:>9} {:>9} {:>8}", "activity", "precision", "recall", "F-score", "support");
    for (name, m) in report.metrics.class_labels.iter().zip(&report.metrics.per_class) {
        println!(
            "{:<22} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            name, m.precision, m.recall, m.f_score, m.support
        );
    }
}
