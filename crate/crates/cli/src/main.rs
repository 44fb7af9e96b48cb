//! Command-line driver: synthesize a dataset, segment an object from clicks or
//! a text label, train its field, render and edit.

mod commands;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use objfield::colmap::ColmapError;
use objfield::field::FieldError;
use objfield::pipeline::{ConfigError, SegmentationError};
use objfield::propagation::PropagationError;
use objfield::scene::SceneError;
use objfield::segmenter::SegmentError;
use objfield::selfprompt::SelfPromptError;

#[derive(Parser, Debug)]
#[command(name = "objfield", version, about = "Prompt-driven object segmentation and voxel radiance fields")]
struct Cli {
    /// TOML or JSON pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic preset to a dataset directory.
    Synth {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Propagate click prompts to every view and filter occluded views.
    Segment {
        #[command(flatten)]
        seg: SegArgs,
        /// Repeatable: "u,v,+" or "u,v,-".
        #[arg(long = "prompt", required = true, allow_hyphen_values = true)]
        prompts: Vec<String>,
        /// View the prompts refer to; defaults to the first view.
        #[arg(long)]
        view: Option<u32>,
    },
    /// Detect the object from a text label, derive prompts, then segment.
    Selfprompt {
        #[command(flatten)]
        seg: SegArgs,
        #[arg(long)]
        text: String,
    },
    /// Fit a voxel field to segmented masks.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Mask index written by `segment` or `selfprompt`.
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        /// Train the scene without the object instead.
        #[arg(long)]
        removal: bool,
    },
    /// Render a checkpoint along an orbit.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Supplies the camera intrinsics and the default orbit radius.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        orbit: OrbitArgs,
    },
    /// Compose an object into a background per an edit script and render it.
    Edit {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        orbit: OrbitArgs,
    },
}

#[derive(Args, Debug)]
struct SegArgs {
    /// Dataset manifest (or the directory holding manifest.json).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Oracle)]
    backend: BackendKind,
    /// tcp://host:port, unix:/path or stdio:<command>.
    #[arg(long)]
    bridge_endpoint: Option<String>,
    /// Id written to the outputs; with the oracle, the ground-truth instance
    /// a text label refers to.
    #[arg(long, default_value_t = 1)]
    object_id: u32,
}

#[derive(Args, Debug)]
struct OrbitArgs {
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Defaults to the first dataset camera's distance from the orbit center.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 25.0)]
    elevation: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BackendKind {
    Oracle,
    Bridge,
}

const EXIT_PARSE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_TRANSPORT: u8 = 4;
const EXIT_DIVERGENCE: u8 = 5;

fn segment_code(e: &SegmentError) -> u8 {
    if e.is_transport() {
        EXIT_TRANSPORT
    } else if matches!(e, SegmentError::InvalidPrompt(_)) {
        EXIT_PARSE
    } else {
        EXIT_DATA
    }
}

/// Maps the first recognised error in the chain to an exit status.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<SegmentError>() {
            return segment_code(e);
        }
        if let Some(e) = cause.downcast_ref::<PropagationError>() {
            return match e {
                PropagationError::Segment(s) | PropagationError::Aborted { source: s, .. } => segment_code(s),
                _ => EXIT_DATA,
            };
        }
        if let Some(SegmentationError::Propagation(e)) = cause.downcast_ref::<SegmentationError>() {
            return match e {
                PropagationError::Segment(s) | PropagationError::Aborted { source: s, .. } => segment_code(s),
                _ => EXIT_DATA,
            };
        }
        if let Some(SelfPromptError::Segment(s)) = cause.downcast_ref::<SelfPromptError>() {
            return segment_code(s);
        }
        if let Some(e) = cause.downcast_ref::<FieldError>() {
            return if matches!(e, FieldError::Divergence { .. }) { EXIT_DIVERGENCE } else { EXIT_DATA };
        }
        if let Some(e) = cause.downcast_ref::<ConfigError>() {
            return if matches!(e, ConfigError::Parse { .. }) { EXIT_PARSE } else { EXIT_DATA };
        }
        if cause.is::<serde_json::Error>() || cause.is::<store::UsageError>() {
            return EXIT_PARSE;
        }
        if cause.is::<ColmapError>() || cause.is::<SceneError>() || cause.is::<SelfPromptError>() || cause.is::<SegmentationError>() {
            return EXIT_DATA;
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
