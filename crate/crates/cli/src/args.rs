//! Command-line grammar.
//!
//! Every subcommand's flag struct is serializable; path-valued flags are
//! skipped there and enter the manifest as content digests instead.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::common::{ModeSpec, SliceSpec, WindowSpec};

/// Tool version followed by the versions of the file formats it writes.
pub const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (checkpoint format bngeom-checkpoint v1, manifest v1)"
);

#[derive(Debug, Parser)]
#[command(name = "bngeom", version = LONG_VERSION, about = "Batch-normalization partition geometry of piecewise-affine networks")]
pub struct Cli {
    /// Worker threads for enumeration and diagnostics (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with per-subcommand defaults; command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network on a toy dataset and write checkpoints.
    Train(TrainArgs),
    /// Sample a reference batch and record its BN statistics.
    FreezeBatch(FreezeBatchArgs),
    /// Enumerate the linear regions of a network inside a window.
    Enumerate(EnumerateArgs),
    /// Normalized offsets of every switching hyperplane from the data centroid.
    Offsets(OffsetsArgs),
    /// Compare offset distributions of a BN / non-BN checkpoint pair.
    Diagnose(DiagnoseArgs),
    /// Check exact arrangement counts against enumeration on random arrangements.
    ArrangementSelftest(SelftestArgs),
    /// Compare intrinsic and pulled-back counts inside parent regions.
    PullbackCheck(PullbackArgs),
    /// Region counts and densities over a radius grid.
    DensityProfile(DensityArgs),
    /// Decision regions and boundaries inside a window.
    DecisionMap(DecisionArgs),
    /// Single-hidden-layer local counts, BN versus non-BN.
    ReproduceTable1(Table1Args),
    /// Deep-network local counts, BN versus non-BN.
    ReproduceTable2(Table2Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::FreezeBatch(_) => "freeze-batch",
            Command::Enumerate(_) => "enumerate",
            Command::Offsets(_) => "offsets",
            Command::Diagnose(_) => "diagnose",
            Command::ArrangementSelftest(_) => "arrangement-selftest",
            Command::PullbackCheck(_) => "pullback-check",
            Command::DensityProfile(_) => "density-profile",
            Command::DecisionMap(_) => "decision-map",
            Command::ReproduceTable1(_) => "reproduce-table1",
            Command::ReproduceTable2(_) => "reproduce-table2",
        }
    }
}

/// Training protocol shared by `train` and the reproduction recipes.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ProtocolArgs {
    /// Samples per generated dataset.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// relu or hard-tanh.
    #[arg(long, default_value = "relu")]
    pub activation: String,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// two-moons, gauss-quantiles or random-uniform.
    #[arg(long)]
    pub dataset: String,
    /// Hidden widths, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub widths: Vec<usize>,
    /// Insert BN after every hidden linear layer.
    #[arg(long)]
    pub bn: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Epochs at which to write checkpoints (default: the last epoch).
    #[arg(long, value_delimiter = ',')]
    pub checkpoint_epochs: Vec<usize>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct FreezeBatchArgs {
    /// Dataset CSV (x1,x2,label) to sample from.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    /// Checkpoint whose BN statistics on the batch are recorded.
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EnumerateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    /// nobn, eval or frozen:<batch.csv>.
    #[arg(long, default_value = "nobn")]
    pub mode: ModeSpec,
    /// x0,y0,r in slice coordinates.
    #[arg(long)]
    pub window: WindowSpec,
    /// p1;p2;origin or random:SEED;origin (default: the input plane).
    #[arg(long)]
    pub slice: Option<SliceSpec>,
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub svg: Option<PathBuf>,
    /// Color cells by predicted class instead of by index.
    #[arg(long)]
    pub classes: bool,
    /// Sample points per cell for the consistency checks.
    #[arg(long, default_value_t = 5)]
    pub check_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct OffsetsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    /// Dataset CSV defining the representation centroids.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long, default_value = "nobn")]
    pub mode: ModeSpec,
    /// 1-based hidden layers (default: all).
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Also report whether each hyperplane cuts the window of this radius.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DiagnoseArgs {
    #[arg(long)]
    #[serde(skip)]
    pub bn_model: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub nonbn_model: PathBuf,
    /// Dataset CSV the reference batches are drawn from.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub batches: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5")]
    pub quantiles: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "-10,-1,-0.1,0.1,1,10")]
    pub shifts: Vec<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    /// Required clearance of intersection points from the window boundary, relative to r.
    #[arg(long, default_value_t = 0.01)]
    pub min_eta: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct PullbackArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[arg(long, default_value = "nobn")]
    pub mode: ModeSpec,
    /// Dataset CSV whose points anchor the parent regions.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    /// 1-based layers to transfer (default: 2..=L).
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Retained windows per layer.
    #[arg(long, default_value_t = 20)]
    pub windows: usize,
    /// Largest radius tried; halved until the window sits in its parent region.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 16)]
    pub halvings: usize,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.95)]
    pub coverage: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DensityArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[arg(long, default_value = "nobn")]
    pub mode: ModeSpec,
    /// Dataset CSV (needed for data and class centers).
    #[arg(long)]
    #[serde(skip)]
    pub data: Option<PathBuf>,
    /// data, classes, or x,y.
    #[arg(long, default_value = "classes")]
    pub centers: String,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,1.5,2")]
    pub radii: Vec<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DecisionArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[arg(long, default_value = "nobn")]
    pub mode: ModeSpec,
    #[arg(long)]
    pub window: WindowSpec,
    #[arg(long)]
    pub slice: Option<SliceSpec>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Table1Args {
    /// Datasets, comma-separated (default: all three).
    #[arg(long, value_delimiter = ',')]
    pub dataset: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    pub width: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Reference batches per BN run.
    #[arg(long, default_value_t = 3)]
    pub ref_batches: usize,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Also write every trained checkpoint.
    #[arg(long)]
    pub save_checkpoints: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Table2Args {
    /// dataset:WIDTHxDEPTH entries, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "two-moons:64x3,random-uniform:32x5")]
    pub configs: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 3)]
    pub ref_batches: usize,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    pub save_checkpoints: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}
