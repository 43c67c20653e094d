use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gesture-skel", version, about = "Audio-driven 2D whole-body skeleton synthesis")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smooth skeletons, align features and write a training dataset.
    Preprocess(PreprocessArgs),
    /// Split videos into shots and clips and apply the quality rules.
    FilterClips(FilterArgs),
    /// Train a denoiser.
    Train(TrainArgs),
    /// Sample a skeleton sequence from a checkpoint.
    Generate(GenerateArgs),
    /// Draw pose maps, one PNG per frame.
    Render(RenderArgs),
    /// Compare predictions with ground truth (SSIM, PSNR, per-joint error).
    Eval(EvalArgs),
    /// Write a small synthetic corpus (skeletons, histograms, features, configs).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Directory of `<video>.skel` files.
    #[arg(long)]
    pub skeletons: PathBuf,
    /// Directory of `<video>.feat` files.
    #[arg(long)]
    pub features: PathBuf,
    /// Clip manifest from `filter-clips`; only accepted clips are kept and
    /// mapped into their crops. Without it every track is one clip.
    #[arg(long)]
    pub clips: Option<PathBuf>,
    #[arg(long, default_value_t = gesture_skel::skeleton::DEFAULT_SMOOTHING_WINDOW)]
    pub smooth_window: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub skeletons: PathBuf,
    /// Directory of `<video>.hist` files.
    #[arg(long)]
    pub histograms: PathBuf,
    /// Rules file (TOML); defaults apply to missing keys.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Manifest file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset manifest written by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's total_steps.
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Reference skeleton (first frame of a `.skel` or pose file).
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long, default_value_t = gesture_skel::diffusion::DEFAULT_GUIDANCE)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frame count; defaults to the audio duration at 25 FPS.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Output id; defaults to the audio file stem.
    #[arg(long)]
    pub id: Option<String>,
    /// Also write `<id>_hands.pose` with the 42 hand keypoints.
    #[arg(long)]
    pub hands: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Pose text file or `.skel` file.
    #[arg(long)]
    pub pose: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub size: u32,
    #[arg(long, default_value_t = 3)]
    pub line_width: u32,
    #[arg(long, default_value_t = 2)]
    pub point_radius: u32,
    #[arg(long, default_value_t = gesture_skel::generation::DEFAULT_CONF_THRESHOLD)]
    pub conf_threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pose files and/or directories of rendered frames.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Report file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub videos: usize,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
