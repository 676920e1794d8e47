use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{AutoOr, CountList};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage or configuration error (nothing written)
  3  unreadable or invalid input data
  4  output could not be written
  5  iteration diverged
  6  background iteration hit its cap before converging (outputs written)
  7  background missing
  8  shape or count mismatch between inputs";

#[derive(Debug, Parser)]
#[command(name = "backdrop", version, about = "Static background extraction and foreground segmentation for video", after_help = EXIT_CODES)]
pub struct Cli {
    /// Key-value config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the static background of a frame sequence.
    Extract(ExtractArgs),
    /// Segment each frame against a background.
    Detect(DetectArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Distance ratio of backgrounds from a growing number of frames.
    Sweep(SweepArgs),
    /// Write a synthetic scene with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    MostDistinct,
    LeastDistinct,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AdmModeArg {
    Solve,
    SingleStep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProjectionArg {
    Mean,
    Median,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Frame directory, manifest file, or tensor file.
    #[arg(long, short)]
    pub input: PathBuf,

    /// Use at most this many leading frames.
    #[arg(long)]
    pub max_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectionArgs {
    /// Frames kept for background extraction.
    #[arg(long)]
    pub n_select: Option<usize>,

    /// Sparsity weight relative to the largest off-diagonal similarity.
    #[arg(long)]
    pub lambda_rel: Option<f64>,

    /// Relative row-norm threshold for a frame to count as useful.
    #[arg(long)]
    pub tau_rel: Option<f64>,

    /// Keep the frames with the largest or smallest distance score.
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Penalty parameter, or `auto`.
    #[arg(long)]
    pub mu: Option<AutoOr>,

    #[arg(long)]
    pub inner_tol: Option<f64>,

    #[arg(long)]
    pub inner_max_iter: Option<usize>,

    #[arg(long)]
    pub outer_tol: Option<f64>,

    #[arg(long)]
    pub outer_max_iter: Option<usize>,

    #[arg(long, value_enum)]
    pub adm_mode: Option<AdmModeArg>,

    /// Carry the multiplier across outer cycles.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub warm_start_lambda: Option<bool>,

    /// Per-pixel reduction of the background update.
    #[arg(long, value_enum)]
    pub projection: Option<ProjectionArg>,
}

#[derive(Debug, Args)]
pub struct MrfArgs {
    /// Per-pixel foreground cost, or `auto`.
    #[arg(long)]
    pub lambda_a: Option<AutoOr>,

    /// Neighbour disagreement cost, or `auto`.
    #[arg(long)]
    pub lambda_b: Option<AutoOr>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,

    #[command(flatten)]
    pub selection: SelectionArgs,

    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Background image or tensor file.
    #[arg(long, conflicts_with = "extract_first")]
    pub background: Option<PathBuf>,

    /// Extract the background from the input first.
    #[arg(long)]
    pub extract_first: bool,

    /// Directory for one mask image per frame.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,

    /// Ground-truth mask directory, one image per frame in name order.
    #[arg(long)]
    pub truth_dir: Option<PathBuf>,

    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,

    #[command(flatten)]
    pub mrf: MrfArgs,

    #[command(flatten)]
    pub selection: SelectionArgs,

    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted mask directory.
    #[arg(long)]
    pub pred_dir: PathBuf,

    /// Ground-truth mask directory.
    #[arg(long)]
    pub truth_dir: PathBuf,

    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Frame counts, e.g. `1..30` or `5,10,25`.
    #[arg(long)]
    pub n: Option<CountList>,

    /// Frame count of the reference background.
    #[arg(long)]
    pub standard_n: Option<usize>,

    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,

    #[command(flatten)]
    pub selection: SelectionArgs,

    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub height: Option<usize>,

    #[arg(long)]
    pub width: Option<usize>,

    #[arg(long)]
    pub frames: Option<usize>,

    /// Side of the moving square in pixels.
    #[arg(long)]
    pub square: Option<usize>,

    /// Square speed in pixels per frame.
    #[arg(long)]
    pub speed: Option<f64>,

    /// Standard deviation of the additive noise.
    #[arg(long)]
    pub noise_sigma: Option<f64>,

    /// Omit the moving square.
    #[arg(long = "static")]
    pub still: bool,
}
