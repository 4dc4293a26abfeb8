use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Parser)]
#[command(name = "wsfair", version, about = "Weak supervision with group source-bias mitigation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run the label-model pipeline on CSV inputs and write a report.
    Run(RunArgs),
    /// Repeat an experiment over a grid of values and seeds.
    Sweep(SweepArgs),
    /// Locate the region where an LF is most accurate and trace accuracy outward.
    CenterScan(CenterScanArgs),
    /// Estimate LF accuracies overall and per group.
    Estimate(EstimateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthExperiment {
    Fig5,
    Lfcount,
    Theorem1,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub experiment: SynthExperiment,
    /// Rows per group for fig5 and theorem1, total rows for lfcount.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Number of LFs (lfcount).
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// LF strength (theorem1).
    #[arg(long, default_value_t = 2.0)]
    pub theta: f64,
    /// Translation of group 1 along (1, 1) (theorem1).
    #[arg(long, default_value_t = 10.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Baseline,
    SbmNone,
    SbmLinear,
    SbmSinkhorn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::SbmNone => "sbm-none",
            Method::SbmLinear => "sbm-linear",
            Method::SbmSinkhorn => "sbm-sinkhorn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cost {
    Sqeuclidean,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Postprocess {
    None,
    DpThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndModelMode {
    Soft,
    Hard,
    None,
}

/// Settings shared by `run` and `sweep`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SbmArgs {
    /// Accuracy gap that triggers a rewrite.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Sinkhorn entropic regularization.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = Cost::Sqeuclidean)]
    pub cost: Cost,
    #[arg(long, default_value_t = 10_000)]
    pub sinkhorn_max_iters: usize,
    /// Rows per side above which Sinkhorn fits on a seeded subsample.
    #[arg(long, default_value_t = 5_000)]
    pub sinkhorn_subsample: usize,
    #[arg(long, default_value_t = 1)]
    pub knn_k: usize,
    /// Label-model class prior: a probability or `estimate`.
    #[arg(long, default_value = "0.5")]
    pub class_prior: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub weak: PathBuf,
    /// True labels; enables accuracy, F1 and equal-opportunity metrics.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::SbmLinear)]
    pub method: Method,
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[arg(long, value_enum, default_value_t = Postprocess::None)]
    pub postprocess: Postprocess,
    #[arg(long, default_value_t = 101)]
    pub threshold_grid: usize,
    /// Evaluate one LF's votes directly instead of the label model
    /// (defaults to the first LF).
    #[arg(long, value_name = "LF", num_args = 0..=1)]
    pub direct_lf_eval: Option<Option<String>>,
    #[arg(long, value_enum, default_value_t = EndModelMode::Soft)]
    pub end_model: EndModelMode,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepExperiment {
    /// Fig.-5 data with `n` per group taken from the grid.
    Samples,
    /// LF-count data with `m` taken from the grid.
    Lfs,
    /// LF accuracy as the points are translated by the grid value.
    Shift,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub experiment: SweepExperiment,
    /// Comma-separated grid; each experiment has its own default.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Half-open seed range `k..k+r`.
    #[arg(long, default_value = "0..10")]
    pub seeds: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Baseline, Method::SbmLinear])]
    pub methods: Vec<Method>,
    /// Rows for the lfs and shift experiments.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 2.0)]
    pub theta: f64,
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CenterScanArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub weak: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// LF to scan; defaults to the first.
    #[arg(long)]
    pub lf: Option<String>,
    #[arg(long, default_value_t = 0.10)]
    pub neighborhood: f64,
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_candidates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub weak: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
