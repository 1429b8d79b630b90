//! Sweep feature selections and state counts over one dataset, sharing the
//! segmentation and localization work across cells, and rank the results.

use egoindex::config::RunConfig;
use egoindex::pipeline::{format_feature_set, parse_feature_set, run_sweep};
use egoindex::synth::{synth_generate, ScenarioScript};

fn main() {
    let root = std::env::temp_dir().join("egoindex-sweep-example");
    let data = root.join("data");
    let out = root.join("sweep");

    let script = ScenarioScript::seven_activities(7);
    synth_generate(&script, 7, &data).unwrap();

    let base = RunConfig { mixture_components: 1, ..RunConfig::default() };
    let feature_sets = vec![
        parse_feature_set("cut+loc").unwrap(),
        parse_feature_set("tpe+cld+loc").unwrap(),
    ];
    let summary =
        run_sweep(&data.join("manifest.json"), &base, &feature_sets, &[1, 3, 5], &out).unwrap();

    println!("{:<14} {:>2} {:>9} {:>8} {:>8} {:>8}", "features", "m", "accuracy", "macro P", "macro R", "macro F");
    for report in &summary.reports {
        println!(
            "{:<14} {:>2} {:>9.4} {:>8.4} {:>8.4} {:>8.4}",
            report.features.map(|f| format_feature_set(&f)).unwrap_or_default(),
            report.states_per_activity.unwrap_or_default(),
            report.micro_accuracy,
            report.macro_precision,
            report.macro_recall,
            report.macro_f_score
        );
    }

    println!();
    for (what, index) in [
        ("precision", summary.best_precision),
        ("recall", summary.best_recall),
        ("F-score", summary.best_f_score),
    ] {
        let r = &summary.reports[index];
        println!(
            "best {:<9} {} with m={}",
            what,
            r.features.map(|f| format_feature_set(&f)).unwrap_or_default(),
            r.states_per_activity.unwrap_or_default()
        );
    }
    println!();
    println!("full report at {}", out.join("sweep_report.json").display());
}
