//! `odcsr`: detect outliers, generate synthetic data, run benchmark sweeps.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 invalid configuration,
//! 3 solver non-convergence under `--strict`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "odcsr", version, about = "Outlier detection by cascaded self-representation")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every point of a data matrix and write a run directory.
    Detect(DetectArgs),
    /// Write a union-of-subspaces dataset with labels.
    Synth(SynthArgs),
    /// Compare the cascade, the single-stage detector and ℓ1-thresholding.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionArg {
    Mean,
    Weighted,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Data matrix: CSV (one point per row) or binary `.odcm`.
    #[arg(long)]
    pub input: PathBuf,

    /// The CSV has a header row of point ids (requires `--cols-are-points`).
    #[arg(long)]
    pub header: bool,

    /// Stored columns are points (default for binary files).
    #[arg(long, conflicts_with = "rows_are_points")]
    pub cols_are_points: bool,

    /// Stored rows are points (default for CSV files).
    #[arg(long)]
    pub rows_are_points: bool,

    /// Skip scaling every point to unit length.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Weight between the ℓ1 and squared ℓ2 penalties, in [0, 1).
    #[arg(long, default_value_t = 0.9)]
    pub lambda: f64,

    /// Per-point data weight γ = α·λ/μ; must exceed 1.
    #[arg(long, default_value_t = 5.0, conflicts_with = "gamma")]
    pub alpha: f64,

    /// Use one fixed data weight γ for every point instead of `--alpha`.
    #[arg(long)]
    pub gamma: Option<f64>,

    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,

    /// Optimality tolerance of the coefficient solver.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,

    /// Number of random-walk steps averaged per stage.
    #[arg(long, default_value_t = 1000)]
    pub walk_steps: usize,

    /// Feed raw residuals to later stages instead of unit-length ones.
    #[arg(long)]
    pub raw_residuals: bool,

    /// Fail with exit code 3 if any column misses the tolerance.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Ground-truth labels (one 0/1 per line); adds `eval.txt` to the run.
    #[arg(long)]
    pub labels: Option<PathBuf>,

    #[arg(long, default_value_t = 3)]
    pub stages: usize,

    #[arg(long, value_enum, default_value_t = FusionArg::Mean)]
    pub fusion: FusionArg,

    /// Comma-separated stage weights for `--fusion weighted`.
    #[arg(long, value_delimiter = ',')]
    pub fusion_weights: Vec<f64>,

    /// Points scoring at or below this are reported as outliers
    /// (default 1e-4 / N).
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Run directory.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub dim: usize,

    #[arg(long, default_value_t = 3)]
    pub subspaces: usize,

    #[arg(long, default_value_t = 4)]
    pub subdim: usize,

    /// Inliers per subspace.
    #[arg(long, default_value_t = 64)]
    pub inliers: usize,

    #[arg(long, default_value_t = 34)]
    pub outliers: usize,

    /// Standard deviation of the Gaussian noise added to inliers.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write `X.odcm` (binary, columns are points) instead of `X.csv`.
    #[arg(long)]
    pub binary: bool,

    /// Output directory for the matrix and `labels.txt`.
    #[arg(long, default_value = "synth")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    #[arg(long)]
    pub labels: PathBuf,

    /// Largest cascade depth; the cascade is reported for 1..=stages.
    #[arg(long, default_value_t = 3)]
    pub stages: usize,

    /// Results CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also write every method's scores and a manifest to this directory.
    #[arg(long)]
    pub scores_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
