use std::path::PathBuf;

use cfrefine::{Format, Variant};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cfrefine",
    version,
    about = "Refined truncated-SVD collaborative filtering experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a ratings file into train and test files.
    Split(SplitArgs),
    /// Run one pipeline variant and report its test RMSE as JSON.
    Eval(EvalArgs),
    /// Test RMSE over a grid of λ, SVD rank or cluster counts, as CSV.
    Sweep(SweepArgs),
    /// Histograms of ratings per item and per user, as CSV.
    Stats(StatsArgs),
    /// Write a seeded synthetic ratings file.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Ratings file to split.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output path for the training part.
    #[arg(long)]
    pub train: PathBuf,
    /// Output path for the test part.
    #[arg(long)]
    pub test: PathBuf,
    /// Share of ratings kept for training.
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Also write the `kind,index,id` map of the input.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<Format>,
}

/// Pipeline settings shared by `eval` and `sweep`. Unset flags fall back to
/// the `--config` file, then to the built-in defaults.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// File of `key=value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pipeline variant(s); `sweep` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub variant: Vec<Variant>,
    /// Blend weight of the corrected averages, in [0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of K-means clusters.
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Number of singular values kept.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Item-mean shrinkage constant.
    #[arg(long)]
    pub k1: Option<f64>,
    /// User-offset shrinkage constant.
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub kmeans_max_iters: Option<usize>,
    #[arg(long)]
    pub kmeans_tol: Option<f64>,
    /// Clamp predictions to the rating range.
    #[arg(long)]
    pub clamp: bool,
    /// Input file format: csv_triples or movielens_tab.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `user_id,item_id,prediction` for every test rating.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Lambda,
    Rank,
    Clusters,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated values and `start:end[:step]` ranges, e.g.
    /// `0:1:0.1` or `1:40`.
    #[arg(long)]
    pub grid: String,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value_t = cfrefine::ratings::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub format: Option<Format>,
    /// Directory receiving `items_hist.csv` and `users_hist.csv`; both
    /// histograms go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 80)]
    pub items: usize,
    #[arg(long, default_value_t = 5)]
    pub factors: usize,
    #[arg(long, default_value_t = 4)]
    pub archetypes: usize,
    #[arg(long, default_value_t = 0.15)]
    pub density: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Destination file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
