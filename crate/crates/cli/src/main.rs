//! `stpotr`: generate synthetic motion, train, evaluate, predict and run
//! follow-ahead scenarios.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric divergence.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stpotr::data::MotionKind;
use stpotr::follow::{HumanPath, StartSide};

/// Bad flags or configuration values.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser, Debug)]
#[command(name = "stpotr", version, about = "Pose and trajectory prediction with a dual non-autoregressive transformer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic motion files.
    Generate(GenerateArgs),
    /// Train a model on a directory of motion files.
    Train(TrainArgs),
    /// Score a checkpoint on a directory of motion files.
    Eval(EvalArgs),
    /// Forecast 20 frames after one frame of a motion file.
    Predict(PredictArgs),
    /// Run follow-ahead scenarios.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Motion kinds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "straight_walk")]
    pub kind: Vec<MotionKind>,
    /// Sequence length in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sequences per kind, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Model settings shared by train, eval and predict.
#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// Starting model config: desk, paper or tiny.
    #[arg(long)]
    pub preset: Option<String>,
    /// key = value config files, applied in order.
    #[arg(long = "config")]
    pub configs: Vec<PathBuf>,
    /// Extra key=value settings, applied after config files.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub no_shared_attention: bool,
    #[arg(long)]
    pub no_end_attention: bool,
    #[arg(long)]
    pub post_normalized: bool,
    /// Shared attention feeds trajectory features into the pose stream instead.
    #[arg(long)]
    pub shared_attention_pose_only: bool,
}

impl ModelArgs {
    pub fn given(&self) -> bool {
        self.preset.is_some()
            || !self.configs.is_empty()
            || !self.sets.is_empty()
            || self.no_shared_attention
            || self.no_end_attention
            || self.post_normalized
            || self.shared_attention_pose_only
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of *.motion files.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Window stride in frames.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "baseline")]
    pub checkpoint: Option<PathBuf>,
    /// Score the repeat-last-frame baseline instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    pub baseline: bool,
    #[arg(long)]
    pub data: PathBuf,
    /// When given, the checkpoint must match this config.
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Timed single-window forecasts; 0 leaves timing out of the report.
    #[arg(long, default_value_t = 20)]
    pub timed: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub motion: PathBuf,
    /// Last observed frame, counted at 10 Hz after resampling.
    #[arg(long)]
    pub t_index: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, required_unless_present = "oracle")]
    pub checkpoint: Option<PathBuf>,
    /// Use the scripted human's true future instead of a model.
    #[arg(long, conflicts_with = "checkpoint")]
    pub oracle: bool,
    /// key = value scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub path: Option<HumanPath>,
    #[arg(long)]
    pub start: Option<StartSide>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run every path against every start side.
    #[arg(long)]
    pub matrix: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<stpotr::Error>() {
            return match e {
                stpotr::Error::Divergence { .. } => 3,
                stpotr::Error::InvalidConfig(_) | stpotr::Error::UnknownKind { .. } => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Simulate(a) => commands::simulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
