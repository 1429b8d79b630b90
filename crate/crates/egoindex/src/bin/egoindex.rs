//! Command-line front end for the egoindex pipeline. Every subcommand maps
//! onto one pipeline stage; stages communicate through declared files in
//! the output directory, so they can be re-run or chained freely.

use clap::{Parser, Subcommand};
use egoindex::config::RunConfig;
use egoindex::io;
use egoindex::pipeline::{
    format_feature_set, parse_feature_set, run_build_voctree, run_decode, run_evaluate,
    run_extract, run_segment, run_sweep, run_train, PipelineError,
};
use egoindex::synth::{synth_generate, ScenarioScript};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "egoindex",
    version,
    about = "Index wearable-camera video into activities: segment on global \
             motion, describe segments, localize frames, decode with a \
             two-level HMM, and score the result."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Synth {
        /// Scenario to script: `seven` (seven activities over five
        /// locations) or `compact` (three activities, small and fast).
        #[arg(long, default_value = "seven")]
        scenario: String,
        /// Directory to create the dataset in.
        #[arg(long)]
        out: PathBuf,
        /// Root seed for the generator.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Estimate global motion and split the video into segments.
    Segment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract per-segment observation vectors.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Feature selection, e.g. `cut+loc` or `tpe+cld+loc`.
        #[arg(long)]
        features: Option<String>,
    },
    /// Build the hierarchical visual vocabulary and the location model.
    BuildVoctree {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the per-activity models and flatten them into one HMM.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        features: Option<String>,
        /// States per activity.
        #[arg(long)]
        states: Option<usize>,
    },
    /// Decode the activity timeline from extracted observations.
    Decode {
        #[arg(long)]
        out: PathBuf,
        /// Trained model file; defaults to `model.json` in the output
        /// directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score a decoded timeline against the dataset ground truth.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        features: Option<String>,
        #[arg(long)]
        states: Option<usize>,
    },
    /// Train and score every combination of feature set and state count.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated state counts, e.g. `1,3,5`.
        #[arg(long, default_value = "1,3,5")]
        m: String,
        /// Comma-separated feature sets, e.g. `cut+loc,tpe+cld+loc`.
        #[arg(long, default_value = "cut+loc,tpe+cld+loc")]
        features: String,
    },
}

fn load_config(
    path: Option<&PathBuf>,
    features: Option<&String>,
    states: Option<usize>,
) -> Result<RunConfig, PipelineError> {
    let mut config: RunConfig = match path {
        Some(path) => io::read_json(path)?,
        None => RunConfig::default(),
    };
    if let Some(text) = features {
        config.features = parse_feature_set(text)?;
    }
    if let Some(m) = states {
        config.states_per_activity = m;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Synth { scenario, out, seed } => {
            let script = match scenario.as_str() {
                "seven" => ScenarioScript::seven_activities(seed),
                "compact" => ScenarioScript::compact(seed),
                other => {
                    return Err(PipelineError::Invalid(format!(
                        "unknown scenario `{}` (expected `seven` or `compact`)",
                        other
                    )))
                }
            };
            let manifest = synth_generate(&script, seed, &out)?;
            println!(
                "synthesized {} frames over {} activities into {}",
                manifest.n_frames,
                manifest.activity_names.len(),
                out.display()
            );
        }
        Command::Segment { manifest, out, config } => {
            let config = load_config(config.as_ref(), None, None)?;
            let segments = run_segment(&manifest, &config, &out)?;
            println!("wrote {} segments to {}", segments.len(), out.join("segments.csv").display());
        }
        Command::Extract { manifest, out, config, features } => {
            let config = load_config(config.as_ref(), features.as_ref(), None)?;
            let (count, dim) = run_extract(&manifest, &config, &out)?;
            println!(
                "wrote {} observations of dimension {} ({}) to {}",
                count,
                dim,
                format_feature_set(&config.features),
                out.join("observations.csv").display()
            );
        }
        Command::BuildVoctree { manifest, out, config } => {
            let config = load_config(config.as_ref(), None, None)?;
            let (nodes, entries) = run_build_voctree(&manifest, &config, &out)?;
            println!(
                "built a {}-node vocabulary tree and a {}-signature location model in {}",
                nodes,
                entries,
                out.display()
            );
        }
        Command::Train { manifest, out, config, features, states } => {
            let config = load_config(config.as_ref(), features.as_ref(), states)?;
            let model = run_train(&manifest, &config, &out)?;
            println!(
                "trained {} activities x {} states on features {}; model at {}",
                model.activity_names.len(),
                model.states_per_activity,
                format_feature_set(&model.features),
                out.join("model.json").display()
            );
        }
        Command::Decode { out, model } => {
            let model_path = model.unwrap_or_else(|| out.join("model.json"));
            let decoded = run_decode(&out, &model_path)?;
            println!(
                "decoded {} segments (log probability {}); timeline at {}",
                decoded.labels.len(),
                decoded.log_probability,
                out.join("decoded.csv").display()
            );
        }
        Command::Evaluate { manifest, out, config, features, states } => {
            let config = load_config(config.as_ref(), features.as_ref(), states)?;
            let report = run_evaluate(&manifest, &config, &out)?;
            println!(
                "accuracy {:.4}, macro F {:.4} over {} held-out segments; report at {}",
                report.metrics.micro_accuracy,
                report.metrics.macro_f_score,
                report.confusion.total(),
                out.join("report.json").display()
            );
        }
        Command::Sweep { manifest, out, config, m, features } => {
            let config = load_config(config.as_ref(), None, None)?;
            let m_values: Vec<usize> = m
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| PipelineError::Invalid(format!("bad state count `{}`", t)))
                })
                .collect::<Result<_, _>>()?;
            let feature_sets = features
                .split(',')
                .map(|t| parse_feature_set(t.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let summary = run_sweep(&manifest, &config, &feature_sets, &m_values, &out)?;
            for report in &summary.reports {
                println!(
                    "{:>14} m={}: accuracy {:.4}, macro F {:.4}, macro P {:.4}, macro R {:.4}",
                    report.features.map(|f| format_feature_set(&f)).unwrap_or_default(),
                    report.states_per_activity.unwrap_or_default(),
                    report.micro_accuracy,
                    report.macro_f_score,
                    report.macro_precision,
                    report.macro_recall
                );
            }
            let best = &summary.reports[summary.best_f_score];
            println!(
                "best macro F {:.4} from features {} with m={}; report at {}",
                best.macro_f_score,
                best.features.map(|f| format_feature_set(&f)).unwrap_or_default(),
                best.states_per_activity.unwrap_or_default(),
                out.join("sweep_report.json").display()
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!(
            "{}",
            serde_json::json!({ "error": error.to_string(), "kind": error.kind() })
        );
        std::process::exit(1);
    }
}
