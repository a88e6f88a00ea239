use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphgi_core::datasets::DatasetKind;
use graphgi_core::explainer::{ExplainerConfig, FrontierMode, Method, SearchMode};
use graphgi_core::gnn::Architecture;
use graphgi_core::shapley::SamplingConfig;

#[derive(Debug, Parser)]
#[command(
    name = "graphgi",
    version,
    about = "Interaction-driven explanations for graph neural networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into a directory.
    Gen(GenArgs),
    /// Train a GCN or GIN on a dataset directory.
    Train(TrainArgs),
    /// Explain model predictions and write records plus DOT renderings.
    Explain(ExplainArgs),
    /// Score explanation directories by fidelity, sparsity and motif recovery.
    Eval(EvalArgs),
    /// Time sampled against exhaustive explanation.
    Bench(BenchArgs),
    /// Render one explanation record as DOT.
    ExportDot(ExportDotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// ba-shapes, ba-community, tree-cycle or tree-grid
    #[arg(value_parser = parse_dataset)]
    pub dataset: DatasetKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ArchArg {
    Gcn,
    Gin,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Gcn => Architecture::Gcn,
            ArchArg::Gin => Architecture::Gin,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ArchArg::Gcn)]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 800)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 20)]
    pub hidden: usize,
    /// Continue from an existing weights file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weights file to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Search flags shared by `explain` and `bench`.
#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub hops: usize,
    #[arg(long, default_value_t = 10)]
    pub max_edges: usize,
    #[arg(long, default_value_t = 100)]
    pub shapley_samples: usize,
    #[arg(long, default_value_t = 100)]
    pub interaction_samples: usize,
    #[arg(long, default_value_t = 0.0)]
    pub min_gain: f64,
    /// Treat each edge and its reverse as one player.
    #[arg(long)]
    pub tie_reverse_edges: bool,
    /// Candidate edges: adjacent to the whole selection or to the last edge.
    #[arg(long, value_enum, default_value_t = FrontierArg::Selection)]
    pub frontier: FrontierArg,
    /// Worker threads across targets.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FrontierArg {
    Selection,
    LastEdge,
}

impl SearchArgs {
    pub fn explainer_config(&self, sampling_seed: u64, mode: SearchMode) -> ExplainerConfig {
        ExplainerConfig {
            hops: self.hops,
            max_edges: self.max_edges,
            sampling: SamplingConfig {
                shapley_samples: self.shapley_samples,
                interaction_samples: self.interaction_samples,
                seed: sampling_seed,
            },
            min_gain: self.min_gain,
            tie_reverse_edges: self.tie_reverse_edges,
            frontier: match self.frontier {
                FrontierArg::Selection => FrontierMode::Selection,
                FrontierArg::LastEdge => FrontierMode::LastEdge,
            },
            mode,
        }
    }
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Explain these nodes.
    #[arg(long = "target", num_args = 1..)]
    pub targets: Vec<usize>,
    /// Explain the first N test nodes by id.
    #[arg(long, conflicts_with = "targets")]
    pub test_top: Option<usize>,
    /// With --test-top, only count test nodes inside a planted motif.
    #[arg(long, requires = "test_top")]
    pub motif_targets: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub targets: TargetArgs,
    #[arg(long, value_parser = parse_method, default_value = "graphgi")]
    pub method: Method,
    /// Edge budget for the baselines (default: --max-edges).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Baseline budgets copied per target from the explanations in this
    /// directory.
    #[arg(long, conflicts_with = "budget")]
    pub match_budgets: Option<PathBuf>,
    /// Enumerate every coalition instead of sampling (small subgraphs only).
    #[arg(long)]
    pub exhaustive: bool,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of explanation records; repeat for several methods.
    #[arg(long = "explanations", required = true, num_args = 1..)]
    pub explanations: Vec<PathBuf>,
    /// Comma-separated sparsity levels for the fidelity curve.
    #[arg(long, value_delimiter = ',')]
    pub sparsity_levels: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Number of test nodes, taken in id order.
    #[arg(long, short = 'n', default_value_t = 5)]
    pub n: usize,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Report file (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportDotArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub explanation: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_dataset(s: &str) -> Result<DatasetKind, String> {
    s.parse().map_err(|e: graphgi_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: graphgi_core::Error| e.to_string())
}
