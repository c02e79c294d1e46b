use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mtclm::model::Method;
use mtclm::simgen::Scenario;

#[derive(Debug, Parser)]
#[command(
    name = "mtclm",
    version,
    about = "Penalized multi-task cumulative logit models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write it as JSON.
    Fit(FitArgs),
    /// Predict category probabilities from a saved model.
    Predict(PredictArgs),
    /// Cross-validate a penalty grid.
    Cv(CvArgs),
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Run the simulation benchmark.
    Bench(BenchArgs),
    /// Record the per-iteration ADMM trace on simulated data.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub label: String,
    /// Highest response level; defaults to the largest observed label.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Fit on the raw predictor scale.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mu_f: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu_1: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_abs: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps_rel: f64,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    /// L1 penalty on screening coefficients (the single lambda for baselines).
    #[arg(long, default_value_t = 0.0)]
    pub lambda11: f64,
    /// L1 penalty on severity coefficients.
    #[arg(long, default_value_t = 0.0)]
    pub lambda12: f64,
    /// Fused penalty on beta - gamma.
    #[arg(long, default_value_t = 0.0)]
    pub lambda_f: f64,
    /// Group penalty on (beta_j, gamma_j).
    #[arg(long, default_value_t = 0.0)]
    pub lambda_g: f64,
}

#[derive(Debug, Args)]
pub struct CvOptions {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Seed for fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Assign folds without balancing response levels.
    #[arg(long)]
    pub unstratified: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Choose the penalty by cross-validation over the default grid instead.
    #[arg(long)]
    pub cv: bool,
    #[command(flatten)]
    pub cv_options: CvOptions,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of predictors; a column named like the model's label is ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// Screening cut-off on P(Y >= 1).
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub cv_options: CvOptions,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CV table CSV (one row per grid point).
    #[arg(long)]
    pub table: PathBuf,
    /// Selected configuration as JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 75)]
    pub p: usize,
    /// Toeplitz correlation between predictors.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed signal magnitude instead of U(0.75, 1.25) draws.
    #[arg(long)]
    pub fixed_magnitude: Option<f64>,
    /// Dataset CSV (predictors x1..xp, then y).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON sidecar.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated scenarios, or `all`.
    #[arg(long, default_value = "all")]
    pub scenarios: String,
    /// Comma-separated methods.
    #[arg(long, default_value = "mtclm-l1,mtclm-fused,mtclm-group,clm-l1")]
    pub methods: String,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 75)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Tidy metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of failed replicates; written only when there are failures.
    #[arg(long)]
    pub failures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 75)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: mtclm::MtclmError| e.to_string())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: mtclm::MtclmError| e.to_string())
}
