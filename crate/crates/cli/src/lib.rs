//! Command line front end: config parsing, the subcommands, and the process
//! entry point shared by the binary and the integration tests.

pub mod commands;
pub mod config;
pub mod overlay;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use moveseg_core::{Error, Result};

pub use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "moveseg", version, about = "Motion-based pseudo ground truth and mask learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file; defaults apply to every key it does not set.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Ground-truth or external masks root.
    #[arg(long, global = true)]
    pub masks: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Prune report to take keep decisions from.
    #[arg(long, global = true)]
    pub prune: Option<PathBuf>,
    /// Segmentation directory scored alongside the model.
    #[arg(long, global = true)]
    pub baseline: Option<PathBuf>,
    #[arg(long, global = true)]
    pub image: Option<PathBuf>,
    #[arg(long, global = true)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Dense optical flow between consecutive frames.
    Flow,
    /// SLIC labeling of every frame.
    Superpixel,
    /// Shot boundaries per video.
    Shots,
    /// Motion segmentation into per-frame probability maps.
    Segment,
    /// Keep/discard report for segmented frames.
    Prune,
    /// Crops and trimap targets from segmentations or masks.
    Dataset,
    /// Degraded copies of a mask directory.
    Degrade,
    /// Train the mask predictor on a dataset.
    Train,
    /// Score a model against ground-truth masks.
    Eval,
    /// Whole-frame masks from a model.
    Infer,
    /// Synthetic moving-square videos with masks.
    Synth,
    /// Highlight a mask on an image.
    Overlay,
    /// Print every configuration key with its default.
    Defaults,
}

/// Exit status for an error: 2 for filesystem failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        2
    } else {
        1
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    if cli.command == Command::Defaults {
        return commands::defaults();
    }
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let io = commands::Inputs {
        input: cli.input.clone(),
        out: cli.out.clone(),
        masks: cli.masks.clone(),
        model: cli.model.clone(),
        prune: cli.prune.clone(),
        baseline: cli.baseline.clone(),
        image: cli.image.clone(),
        mask: cli.mask.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Flow => commands::flow(&cfg, &io),
        Command::Superpixel => commands::superpixel(&cfg, &io),
        Command::Shots => commands::shots(&cfg, &io),
        Command::Segment => commands::segment(&cfg, &io),
        Command::Prune => commands::prune(&cfg, &io),
        Command::Dataset => commands::dataset(&cfg, &io),
        Command::Degrade => commands::degrade(&cfg, &io),
        Command::Train => commands::train_cmd(&cfg, &io),
        Command::Eval => commands::eval(&cfg, &io),
        Command::Infer => commands::infer(&cfg, &io),
        Command::Synth => commands::synth(&cfg, &io),
        Command::Overlay => commands::overlay_cmd(&cfg, &io),
        Command::Defaults => commands::defaults(),
    })
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
