use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skeva::diskeva::SecondCheck;
use skeva::skeva_dims::RankFunction;

#[derive(Debug, Parser)]
#[command(name = "skeva", version, about = "Sketch-and-validate K-means clustering")]
pub struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full K-means with restarts.
    Kmeans(KmeansArgs),
    /// Batch sketching over dimensions.
    Skeva(SkevaArgs),
    /// Sequential sketching over dimensions with early stopping.
    Seskeva(SeskevaArgs),
    /// Kernel sketching over points.
    Keskeva(KeskevaArgs),
    /// Divergence-selected sketching over points.
    #[command(name = "diskeva-n")]
    DiskevaN(DiskevaNArgs),
    /// Divergence-selected sketching over dimensions.
    #[command(name = "diskeva-d")]
    DiskevaD(DiskevaDArgs),
    /// K-means after a random sign projection.
    Rp(RpArgs),
    /// Writes a synthetic Gaussian-mixture data set.
    Gen(GenArgs),
    /// Runs a Monte-Carlo experiment described by a TOML file.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Whitespace,
    Libsvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankArg {
    Card,
    Fdr,
}

impl From<RankArg> for RankFunction {
    fn from(r: RankArg) -> Self {
        match r {
            RankArg::Card => RankFunction::Cardinality,
            RankArg::Fdr => RankFunction::FdrWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckArg {
    /// Estimate built from the extra sample alone.
    Extra,
    /// Estimate built from the sketch sample.
    Sketch,
}

impl From<CheckArg> for SecondCheck {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Extra => SecondCheck::ExtraPoints,
            CheckArg::Sketch => SecondCheck::SketchPoints,
        }
    }
}

/// Input data, clustering size and output location shared by every method.
#[derive(Debug, Args)]
pub struct Common {
    /// Data file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Csv)]
    pub format: InputFormat,
    /// Feature count, required for LIBSVM input.
    #[arg(long = "D", value_name = "D")]
    pub dims: Option<usize>,
    /// Header lines to skip in dense input.
    #[arg(long, default_value_t = 0, value_name = "LINES")]
    pub skip_header: usize,
    /// Each line of dense input holds one feature instead of one point.
    #[arg(long)]
    pub points_as_columns: bool,
    /// Scale every feature to zero mean and unit variance before clustering.
    #[arg(long)]
    pub standardize: bool,
    /// Number of clusters.
    #[arg(long = "K", value_name = "K")]
    pub k: usize,
    /// K-means restarts per clustering.
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving labels.txt, trace.csv and summary.json.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Reference labels, one per line, for the accuracy in summary.json.
    #[arg(long, value_name = "PATH")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SkevaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sketch rows per draw.
    #[arg(long = "d", value_name = "D")]
    pub d: usize,
    /// Validation rows per draw.
    #[arg(long, default_value_t = 100)]
    pub daug: usize,
    /// Number of draws.
    #[arg(long = "R", default_value_t = 10, value_name = "R")]
    pub draws: usize,
    /// Rank function scoring each draw.
    #[arg(long = "f", value_enum, default_value_t = RankArg::Fdr, value_name = "F")]
    pub rank: RankArg,
}

#[derive(Debug, Args)]
pub struct SeskevaArgs {
    #[command(flatten)]
    pub skeva: SkevaArgs,
    /// Stop augmenting once consecutive scores differ by at most this.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Discard a draw whose score settles instead of keeping it.
    #[arg(long)]
    pub reject_settled: bool,
}

#[derive(Debug, Args)]
pub struct KeskevaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sketch points per draw.
    #[arg(long)]
    pub nu: usize,
    /// Validation points per draw; defaults to the sketch size.
    #[arg(long)]
    pub nuaug: Option<usize>,
    #[arg(long = "R", default_value_t = 10, value_name = "R")]
    pub draws: usize,
    /// `linear`, `gaussian:<sigma2>` or `sigmoid:<alpha>,<b>`.
    #[arg(long, default_value = "linear")]
    pub kernel: String,
}

#[derive(Debug, Args)]
pub struct DiskevaNArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub nu: usize,
    #[arg(long)]
    pub nuaug: Option<usize>,
    #[arg(long = "R", default_value_t = 10, value_name = "R")]
    pub draws: usize,
    /// Parzen kernel variance.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Sample compared against the empty set in the second check.
    #[arg(long, value_enum, default_value_t = CheckArg::Extra)]
    pub second_check: CheckArg,
}

#[derive(Debug, Args)]
pub struct DiskevaDArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "d", value_name = "D")]
    pub d: usize,
    #[arg(long, default_value_t = 100)]
    pub daug: usize,
    #[arg(long = "R", default_value_t = 10, value_name = "R")]
    pub draws: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, value_enum, default_value_t = CheckArg::Extra)]
    pub second_check: CheckArg,
}

#[derive(Debug, Args)]
pub struct RpArgs {
    #[command(flatten)]
    pub common: Common,
    /// Projection dimension.
    #[arg(long = "d", value_name = "D")]
    pub d: usize,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long = "D", value_name = "D")]
    pub dims: usize,
    #[arg(long = "N", value_name = "N")]
    pub points: usize,
    #[arg(long = "K", value_name = "K")]
    pub k: usize,
    /// Rank of each cluster covariance; defaults to D.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Side of the hypercube holding the cluster means.
    #[arg(long)]
    pub side: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Data file, one point per line.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// True cluster of every point, one per line.
    #[arg(long, value_name = "PATH")]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment description (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Directory receiving report.csv and summary.json.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
}
