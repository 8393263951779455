use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Partial-linear additive models with selected interactions.
#[derive(Debug, Parser)]
#[command(name = "plam", version)]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, env = "PLAM_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write it as JSON.
    Fit(FitArgs),
    /// Compare models by k-fold cross-validation on shared folds.
    Evaluate(EvaluateArgs),
    /// Run the Monte Carlo study for one data-generating setup.
    Simulate(SimulateArgs),
    /// Write smooth and marginal-effect curves of a fitted model.
    ExportEffects(EffectsArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Comma-separated input file with a header row.
    #[arg(long)]
    pub data: PathBuf,

    /// Name of the response column.
    #[arg(long)]
    pub target: String,

    /// Column kind overrides, e.g. `chas=binary,id=excluded`.
    #[arg(long)]
    pub kinds: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Model spec, e.g. `gama:alpha=0.01` or `gamla:lambda=min,dim=8`.
    #[arg(long)]
    pub model: String,

    /// Extra options applied on top of the model spec, e.g. `lambda=min`.
    #[arg(long)]
    pub tuning: Option<String>,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Model spec; repeat for each model to compare.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,

    /// Options applied to every listed model that accepts them.
    #[arg(long)]
    pub tuning: Option<String>,

    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Significance level of the model confidence set.
    #[arg(long, default_value_t = 0.10)]
    pub mcs_alpha: f64,

    /// Bootstrap replications for the model confidence set.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,

    /// Report file (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Per-row squared-error losses (CSV, one column per model).
    #[arg(long)]
    pub losses: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Data-generating setup, 1 to 4.
    #[arg(long)]
    pub setup: Option<u8>,

    /// DGP configuration file (JSON); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Number of replications.
    #[arg(long, default_value_t = 200)]
    pub reps: usize,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Model spec; repeat for each model. Defaults depend on the setup.
    #[arg(long = "model")]
    pub models: Vec<String>,

    /// Options applied to every listed model that accepts them.
    #[arg(long)]
    pub tuning: Option<String>,

    /// Output prefix; writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EffectsArgs {
    /// Model file written by `plam fit`.
    #[arg(long)]
    pub model: PathBuf,

    /// Smooth variable to export.
    #[arg(long)]
    pub variable: String,

    /// Number of grid points.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,

    /// Partner-variable quantile levels for the marginal-effect curves.
    #[arg(long, value_delimiter = ',', default_values_t = plam::gamla::DEFAULT_QUANTILES)]
    pub quantiles: Vec<f64>,

    /// Output prefix; writes `<out>_smooth.csv` and `<out>_marginal.csv`.
    #[arg(long)]
    pub out: PathBuf,
}
