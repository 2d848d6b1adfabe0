//! `openended-lab`: describe point clouds, compare histograms, and run
//! offline and open-ended evaluations of instance-based recognizers.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "openended-lab", version, about, arg_required_else_help = true)]
pub struct Cli {
    /// Seed for every random choice made by this invocation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads (affects speed only).
    #[arg(long, global = true, env = "OPENENDED_LAB_THREADS")]
    pub threads: Option<usize>,

    /// Report zero for all wall-clock timings so outputs are reproducible.
    #[arg(long, global = true)]
    pub no_timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the GOOD histogram of one cloud as a CSV row.
    Describe(DescribeArgs),
    /// Distance between two histogram rows.
    Dist(DistArgs),
    /// Describe every view of a dataset directory into a feature CSV.
    Extract(ExtractArgs),
    /// Stratified K-fold cross-validation of one recognizer.
    OfflineEval(OfflineArgs),
    /// Grid search over recognizer configurations.
    Tune(TuneArgs),
    /// Simulated-teacher open-ended evaluation.
    OnlineEval(OnlineArgs),
    /// Render protocol curves into SVG plots and an HTML page.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct DescribeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    /// Accept near-equal eigenvalues and break ties lexicographically.
    #[arg(long)]
    pub force_frame: bool,
    /// Also print the three projection matrices and their ordering.
    #[arg(long)]
    pub explain: bool,
}

#[derive(Args, Debug)]
pub struct DistArgs {
    /// Metric name or `all`.
    #[arg(long, default_value = "all")]
    pub metric: String,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    #[arg(long)]
    pub force_frame: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Recognizer flags shared by the evaluation commands; each overrides the
/// config file.
#[derive(Args, Debug, Default)]
pub struct RecognizerArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub metric_h: Option<String>,
    #[arg(long)]
    pub metric_d: Option<String>,
    /// Weight of the deep representation in the combined distance.
    #[arg(long)]
    pub w: Option<f64>,
    /// GOOD bins, used when describing a dataset directory.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub force_frame: bool,
}

#[derive(Args, Debug)]
pub struct OfflineArgs {
    /// Dataset directory or feature CSV.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Feature CSV whose rows fill in missing representations.
    #[arg(long)]
    pub deep: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub recognizer: RecognizerArgs,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub deep: Option<PathBuf>,
    /// JSON grid file; defaults to the hand-crafted sweep at 30 bins.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rows of the ranked table to print.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Args, Debug)]
pub struct OnlineArgs {
    /// Feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Point-cloud dataset directory, described on the fly.
    #[arg(long, conflicts_with = "features")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub deep: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Threshold; a comma-separated list runs a sweep.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub intro_views: Option<usize>,
    #[arg(long)]
    pub window_factor: Option<usize>,
    #[arg(long)]
    pub stall_budget: Option<usize>,
    /// Stop when a category runs out of unseen views instead of reusing them.
    #[arg(long)]
    pub no_reuse: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub recognizer: RecognizerArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory of an `online-eval` run.
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to `<input>/report`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const EXIT_DATA: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size thread pool: {e}");
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let degenerate = e
                .chain()
                .filter_map(|c| c.downcast_ref::<openended_core::Error>())
                .any(openended_core::Error::is_degenerate_input);
            ExitCode::from(if degenerate { EXIT_DEGENERATE } else { EXIT_DATA })
        }
    }
}
