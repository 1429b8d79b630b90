//! End-to-end tests of the command-line interface: each subcommand is run
//! as a child process against synthetic datasets, and the staged chain is
//! checked against the one-shot library pipeline.

use egoindex::config::RunConfig;
use egoindex::descriptors::FeatureConfig;
use egoindex::evaluate::SweepSummary;
use egoindex::io;
use egoindex::pipeline::{run_pipeline, PipelineReport};
use egoindex::synth::{
    synth_generate, ActivityProfile, Interval, MotionRegime, ScenarioScript,
};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn egoindex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egoindex"))
        .args(args)
        .output()
        .expect("spawn egoindex")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn small_config() -> RunConfig {
    RunConfig {
        mixture_components: 1,
        states_per_activity: 1,
        branching: 3,
        levels: 2,
        seed: 17,
        ..Default::default()
    }
}

fn write_config(dir: &Path, config: &RunConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    io::write_json(&path, config).unwrap();
    path
}

#[test]
fn still_camera_collapses_to_one_segment() {
    let dir = tempfile::tempdir().unwrap();
    let still = MotionRegime {
        drift: (0.0, 0.0),
        translation_jitter: 0.0,
        linear_bias: [0.0; 4],
        linear_jitter: 0.0,
        block_noise: 0.0,
        outlier_fraction: 0.0,
    };
    let script = ScenarioScript {
        width: 64,
        height: 64,
        frame_rate: 25.0,
        activities: vec![ActivityProfile {
            label: "staring_at_wall".into(),
            location: "wall".into(),
            regime: still,
            color_mean: [120.0, 120.0, 120.0],
            color_noise: 0.0,
        }],
        locations: vec!["wall".into()],
        intervals: vec![Interval { activity: 0, start_frame: 0, end_frame: 59 }],
        descriptor_dim: 4,
        descriptor_centers: vec![vec![vec![0.0; 4], vec![1.0; 4]]],
        descriptor_noise: 0.1,
        descriptors_per_frame: 4,
        descriptor_stride: 5,
    };
    let data = dir.path().join("data");
    synth_generate(&script, 5, &data).unwrap();

    let out = dir.path().join("run");
    let manifest = data.join("manifest.json");
    assert_success(&egoindex(&[
        "segment",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let segments = io::read_segments_csv(&out.join("segments.csv")).unwrap();
    assert_eq!(segments.len(), 1);
    assert_eq!(segments[0].start_frame, 0);
    assert_eq!(segments[0].end_frame, 59);
}

#[test]
fn decode_without_a_model_reports_a_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = egoindex(&["decode", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let error: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(error["kind"], "missing-model");
    assert!(error["error"].as_str().unwrap().contains("model.json"));
}

#[test]
fn unknown_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = egoindex(&["synth", "--scenario", "bogus", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let error: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(error["kind"], "invalid");
}

#[test]
fn staged_chain_matches_the_one_shot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_success(&egoindex(&[
        "synth",
        "--scenario",
        "compact",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "17",
    ]));
    let manifest = data.join("manifest.json");
    let manifest_arg = manifest.to_str().unwrap();
    let config = small_config();
    let config_path = write_config(dir.path(), &config);
    let config_arg = config_path.to_str().unwrap();

    let staged = dir.path().join("staged");
    let staged_arg = staged.to_str().unwrap();
    for args in [
        vec!["segment", "--manifest", manifest_arg, "--out", staged_arg, "--config", config_arg],
        vec!["build-voctree", "--manifest", manifest_arg, "--out", staged_arg, "--config", config_arg],
        vec!["extract", "--manifest", manifest_arg, "--out", staged_arg, "--config", config_arg],
        vec!["train", "--manifest", manifest_arg, "--out", staged_arg, "--config", config_arg],
        vec!["decode", "--out", staged_arg],
        vec!["evaluate", "--manifest", manifest_arg, "--out", staged_arg, "--config", config_arg],
    ] {
        assert_success(&egoindex(&args));
    }

    let oneshot = dir.path().join("oneshot");
    run_pipeline(&manifest, &config, &oneshot).unwrap();

    for name in ["model.json", "decoded.csv", "decode.json", "report.json"] {
        let a = fs::read(staged.join(name)).unwrap();
        let b = fs::read(oneshot.join(name)).unwrap();
        assert_eq!(a, b, "{} differs between the staged chain and the one-shot run", name);
    }

    let report: PipelineReport = io::read_json(&staged.join("report.json")).unwrap();
    assert!(report.metrics.micro_accuracy >= 0.8, "accuracy {}", report.metrics.micro_accuracy);
}

#[test]
fn sweep_writes_one_report_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_success(&egoindex(&[
        "synth",
        "--scenario",
        "compact",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "17",
    ]));
    let config_path = write_config(dir.path(), &small_config());
    let out = dir.path().join("sweep");
    assert_success(&egoindex(&[
        "sweep",
        "--manifest",
        data.join("manifest.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--config",
        config_path.to_str().unwrap(),
        "--m",
        "1",
        "--features",
        "cut+loc,tpe+cld+loc",
    ]));
    let summary: SweepSummary = io::read_json(&out.join("sweep_report.json")).unwrap();
    assert_eq!(summary.reports.len(), 2);
    let expected = [
        FeatureConfig {
            cut_histogram: true,
            tpe_histogram: false,
            color_layout: false,
            localization_histogram: true,
        },
        FeatureConfig {
            cut_histogram: false,
            tpe_histogram: true,
            color_layout: true,
            localization_histogram: true,
        },
    ];
    for (report, features) in summary.reports.iter().zip(expected) {
        assert_eq!(report.features, Some(features));
        assert_eq!(report.states_per_activity, Some(1));
    }
    assert!(out.join("cells/cut-loc_m1/report.json").is_file());
    assert!(out.join("cells/tpe-cld-loc_m1/report.json").is_file());
    assert!(summary.best_f_score < summary.reports.len());
}
