use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use countsynth::synthesis::ZeroPolicy;
use countsynth::Family;

#[derive(Parser, Debug)]
#[command(name = "countsynth", version, about = "Protect contingency tables by count-distribution synthesis")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Where to write the run manifest (default: beside the outputs, when there is an output directory).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read microdata or aggregated CSV and write the aggregated table.
    Ingest(IngestArgs),
    /// Draw synthetic replicates of a table.
    Synth(SynthArgs),
    /// Empirical and analytic risk/utility metrics for a stored ensemble.
    Metrics(MetricsArgs),
    /// Print one analytic metric without synthesizing.
    Apriori(AprioriArgs),
    /// Solve for sigma or nu so an analytic metric hits a target.
    Calibrate(CalibrateArgs),
    /// Analytic risk-utility points over parameter grids.
    Sweep(SweepArgs),
    /// Generate a fixture table with a prescribed cell-size histogram.
    Genfixture(GenfixtureArgs),
    /// Inspect distributions.
    Dist {
        #[command(subcommand)]
        command: DistCommand,
    },
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Schema JSON; inferred from microdata when omitted.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, conflicts_with = "aggregated", required_unless_present = "aggregated")]
    pub microdata: Option<PathBuf>,
    #[arg(long, requires = "schema")]
    pub aggregated: Option<PathBuf>,
    /// Output aggregated CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the (possibly inferred) schema.
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
    /// Write rows for zero cells too.
    #[arg(long)]
    pub include_zero: bool,
}

/// Original table: schema JSON plus aggregated CSV.
#[derive(Args, Debug, Clone)]
pub struct TableInput {
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
}

/// Cell-size histogram from a table or from a `size,frequency` CSV.
#[derive(Args, Debug, Clone)]
pub struct HistogramInput {
    #[arg(long, requires = "table")]
    pub schema: Option<PathBuf>,
    #[arg(long, requires = "schema", conflicts_with = "histogram")]
    pub table: Option<PathBuf>,
    /// CSV with columns `size,frequency` (exact sizes, zero included).
    #[arg(long)]
    pub histogram: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// `keep`, `alpha=<a>` or `bernoulli=<p>`.
    #[arg(long, default_value = "keep")]
    pub zero_policy: ZeroPolicy,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyArg {
    Poisson,
    Nbi,
    Gaf,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poisson => Family::Poisson,
            FamilyArg::Nbi => Family::Nbi,
            FamilyArg::Gaf => Family::Gaf,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub input: TableInput,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Master seed; required so that every run is reproducible.
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write one aggregated CSV per replicate.
    #[arg(long)]
    pub per_replicate: bool,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub input: TableInput,
    /// Directory written by `synth`.
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Sizes k for the tau metrics, e.g. `0-10` or `1,2,5`.
    #[arg(long, default_value = "0-10")]
    pub sizes: String,
    /// Variables of the log-linear utility model (default ETHNICITY,AGE,LANGUAGE when present).
    #[arg(long, value_delimiter = ',')]
    pub fit_vars: Option<Vec<String>>,
    /// Interaction order of the utility model.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Largest count shown individually in the count cross-tabulations.
    #[arg(long, default_value_t = 20)]
    pub cap: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricArg {
    Tau1,
    Tau2,
    Tau3,
    Tau4,
    L1,
    Coverage,
    Variance,
}

#[derive(Args, Debug)]
pub struct AprioriArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub histogram: HistogramInput,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 1)]
    pub k: u64,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Half-width for `coverage`.
    #[arg(long)]
    pub d: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreeArg {
    Sigma,
    Nu,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub histogram: HistogramInput,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    #[arg(long, allow_negative_numbers = true)]
    pub target: f64,
    #[arg(long, value_enum)]
    pub free: FreeArg,
    #[arg(long, default_value_t = 1)]
    pub k: u64,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lower: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub upper: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub histogram: HistogramInput,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5,1,2")]
    pub sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,-0.25,-0.5")]
    pub nus: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "gaf,nbi")]
    pub families: Vec<FamilyArg>,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value = "keep")]
    pub zero_policy: ZeroPolicy,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenfixtureArgs {
    /// Schema JSON (default: the built-in five-variable census schema).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Target histogram CSV: `size` plus `proportion` or `frequency`; a size like `11+` is an open tail.
    /// Default: the built-in census cell-size histogram.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Mean cell size inside the open tail bucket.
    #[arg(long, default_value_t = 100.0)]
    pub tail_mean: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Skip writing one row per individual.
    #[arg(long)]
    pub no_microdata: bool,
}

#[derive(Subcommand, Debug)]
pub enum DistCommand {
    /// Write a pmf as `y,probability` CSV.
    Pmf(PmfArgs),
}

#[derive(Args, Debug)]
pub struct PmfArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tail_eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
