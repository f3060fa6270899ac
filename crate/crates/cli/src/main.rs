//! `plantwatch` command-line tool.
//!
//! Exit status: 0 when the command ran and every requested gate held, 1 when
//! it ran but a gate failed, 2 when it could not run (bad arguments, config,
//! missing data, I/O).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "plantwatch", version, about = "Adaptive anomaly detection for water-treatment telemetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the two-tank plant as CSV exports plus a manifest.
    Synth(SynthArgs),
    /// Fit the forecaster and threshold models and save them.
    Train(TrainArgs),
    /// Refit only the threshold models of a trained system.
    TuneThresholds(TuneArgs),
    /// Stream records through a trained system and write one row per record.
    Detect(DetectArgs),
    /// Full experiment: fit, replay with and without feedback, sweeps, report.
    Evaluate(EvaluateArgs),
    /// One parameter sweep against a trained system.
    Sweep(SweepArgs),
    /// Run the replay service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ManifestArg {
    /// Experiment manifest (JSON). Relative paths inside resolve against its directory.
    #[arg(long, short)]
    manifest: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for normal.csv, attack.csv and manifest.json.
    #[arg(long, short)]
    out: PathBuf,
    /// Seconds of attack-free operation (training plus validation).
    #[arg(long)]
    normal_seconds: Option<usize>,
    /// Forecaster training epochs written into the manifest.
    #[arg(long)]
    epochs: Option<usize>,
    /// Threshold-model training epochs written into the manifest.
    #[arg(long)]
    ttnn_epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Model directory to write.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    #[arg(long)]
    model: PathBuf,
    /// Median kernel applied to the validation error before training (odd).
    #[arg(long)]
    median_kernel: Option<usize>,
    #[arg(long)]
    ttnn_epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    #[arg(long)]
    model: PathBuf,
    /// CSV to score instead of the manifest's test split.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Per-record output CSV.
    #[arg(long, short)]
    out: PathBuf,
    /// Let the manifest's simulated technician answer alarms.
    #[arg(long)]
    feedback: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RunChoice {
    Baseline,
    Adapted,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// Report directory.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    /// Skip the W_anom, W_grace and noise sweeps.
    #[arg(long)]
    no_sweeps: bool,
    /// Which replay the gates judge.
    #[arg(long, value_enum, default_value_t = RunChoice::Adapted)]
    gate_run: RunChoice,
    #[arg(long)]
    min_f1: Option<f64>,
    #[arg(long)]
    min_detected: Option<usize>,
    #[arg(long)]
    max_interventions_per_hour: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    WAnom,
    WGrace,
    Sigma,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated values; the manifest's list when omitted.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Plot-ready CSV.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Service config (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Listen address; overrides PLANTWATCH_BIND.
    #[arg(long)]
    bind: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::TuneThresholds(a) => commands::tune(a),
        Command::Detect(a) => commands::detect(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Serve(a) => commands::serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plantwatch: {e}");
            ExitCode::from(e.code())
        }
    }
}
