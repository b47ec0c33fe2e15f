use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pointcutmix::batch::Pairing;
use pointcutmix::MixMode;

/// Optimal-assignment mixing augmentation for point clouds.
#[derive(Debug, Parser)]
#[command(name = "pointcutmix", version, about)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Earth Mover's Distance between two clouds.
    Emd(EmdArgs),
    /// Mix two labelled clouds into one sample.
    Mix(MixArgs),
    /// Augment a class-per-folder dataset.
    Augment(AugmentArgs),
    /// Augment a part-labelled dataset, carrying per-point labels.
    SegmentAugment(SegmentArgs),
    /// Surface-sample a mesh into a point cloud.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct EmdArgs {
    pub file_a: PathBuf,
    pub file_b: PathBuf,
    /// Resample both clouds to N points first.
    #[arg(long, value_name = "N")]
    pub equalize: Option<usize>,
    /// Seed for resampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the optimal permutation, one index per line.
    #[arg(long, value_name = "FILE")]
    pub dump_assignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    pub file_a: PathBuf,
    /// Class index of the first cloud.
    pub label_a: usize,
    pub file_b: PathBuf,
    /// Class index of the second cloud.
    pub label_b: usize,
    #[arg(long, default_value_t = MixMode::Knn)]
    pub mode: MixMode,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub num_points: usize,
    /// Per-point weights for the first cloud: a PLY with a `saliency`
    /// property, or one number per line. Required by `--mode s`.
    #[arg(long, value_name = "FILE")]
    pub saliency: Option<PathBuf>,
    /// Use this ratio instead of drawing one from Beta(β, β).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of classes (default: largest label + 1).
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Output PLY; a `.json` sidecar with the same stem is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Directory with one sub-folder per class.
    pub dataset_dir: PathBuf,
    #[arg(long, default_value_t = MixMode::Knn)]
    pub mode: MixMode,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub num_points: usize,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = Pairing::Random)]
    pub pairs: Pairing,
    /// Worker threads (0 = all cores). Does not affect the output.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: DatasetArgs,
    /// Probability of mixing each sample.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub common: DatasetArgs,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// OFF mesh.
    pub mesh_file: PathBuf,
    #[arg(long, default_value_t = 1024)]
    pub num_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Center and scale into the unit sphere.
    #[arg(long)]
    pub normalize: bool,
    /// Output `.ply` or `.xyz`.
    #[arg(long)]
    pub out: PathBuf,
}
