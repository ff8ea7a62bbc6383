//! `sympcast`: run the symptom-survey prediction and forecasting
//! experiments from the command line.
//!
//! Exit status is 0 on success, 2 for usage or validation errors and 1 when
//! a computation fails. Reports go to the output directory; stdout lists
//! the files written.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Ctx, DataFlags, FileConfig};

/// Bad input from the user: flags, config, data files or specs.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser)]
#[command(name = "sympcast", version, about = "Prevalence prediction and forecasting from symptom-survey panels")]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for data generation, splits and model initialization (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Repetitions for repeated evaluation (default 20).
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum AblateMode {
    AllButOne,
    Cumulative,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OrderArg {
    LeastFirst,
    MostFirst,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Mean,
    Flatten,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the planted synthetic panel.
    Synth {
        #[arg(long)]
        regions: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        signals: Option<usize>,
        /// Planted weights, comma separated, largest magnitude first.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Observation noise standard deviation.
        #[arg(long)]
        noise: Option<f64>,
        /// AR(1) coefficient of the latent signals.
        #[arg(long)]
        ar: Option<f64>,
    },
    /// Read and validate a panel CSV, writing the normalized panel and audit.
    Ingest {
        #[command(flatten)]
        data: DataFlags,
    },
    /// Apply the schema's pruning rules.
    Prune {
        #[command(flatten)]
        data: DataFlags,
    },
    /// Rank features by univariate F statistic.
    Rank {
        #[command(flatten)]
        data: DataFlags,
    },
    /// Pairwise Pearson correlations with p-values.
    Correlate {
        #[command(flatten)]
        data: DataFlags,
        /// Columns to correlate (default: all features and the target).
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        /// |r| above which a pair is flagged (default 0.9).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Repeated-split regression on the top-ranked features.
    Predict {
        #[command(flatten)]
        data: DataFlags,
        /// linear, tree or gbt (default gbt).
        #[arg(long)]
        model: Option<String>,
        /// Sweep n = 1..=max-n over the ranking (the default without --top-n).
        #[arg(long, conflicts_with = "top_n")]
        sweep: bool,
        /// Evaluate only the top n features.
        #[arg(long)]
        top_n: Option<usize>,
        #[arg(long)]
        max_n: Option<usize>,
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Normal-approximation confidence interval instead of Student-t.
        #[arg(long)]
        normal_ci: bool,
        /// Also write figure CSVs.
        #[arg(long)]
        plot_data: bool,
    },
    /// Chronological backtest of a VAR or LSTM forecaster per region.
    Forecast {
        #[command(flatten)]
        data: DataFlags,
        /// var or lstm (default var).
        #[arg(long)]
        model: Option<String>,
        /// Held-out days (default 30).
        #[arg(long)]
        horizon: Option<usize>,
        /// Region to backtest; repeatable (default: every region).
        #[arg(long = "region")]
        regions: Vec<String>,
        /// Number of top-ranked signals modeled with the target (default 3).
        #[arg(long)]
        features: Option<usize>,
        /// Largest VAR lag order considered (default 7).
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
    },
    /// All-but-one or cumulative feature ablation.
    Ablate {
        #[command(flatten)]
        data: DataFlags,
        #[arg(long, value_enum, default_value = "all-but-one")]
        mode: AblateMode,
        /// Number of top-ranked features (default 10).
        #[arg(long)]
        top: Option<usize>,
        /// Drop order for cumulative mode.
        #[arg(long, value_enum, default_value = "least-first")]
        order: OrderArg,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        plot_data: bool,
    },
    /// Augmented Dickey-Fuller test per region.
    Adf {
        #[command(flatten)]
        data: DataFlags,
        /// Column to test (default: the target).
        #[arg(long)]
        column: Option<String>,
        #[arg(long)]
        max_lag: Option<usize>,
    },
    /// Agglomerative clustering of regions by signal profile.
    Cluster {
        #[command(flatten)]
        data: DataFlags,
        #[arg(long)]
        k: Option<usize>,
        /// average, single or complete (default average).
        #[arg(long)]
        linkage: Option<String>,
        #[arg(long, value_enum, default_value = "mean")]
        profile: ProfileArg,
        /// Also pick this many regions from distinct clusters.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// DTW distance between two series stored as CSV columns.
    Dtw {
        a: PathBuf,
        b: PathBuf,
        /// Column to read from both files (default: the last column).
        #[arg(long)]
        column: Option<String>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let ctx = Ctx::new(file, cli.seed, cli.runs, cli.out)?;
    match cli.cmd {
        Cmd::Synth { regions, days, signals, weights, noise, ar } => {
            commands::synth(&ctx, commands::SynthArgs { regions, days, signals, weights, noise, ar })
        }
        Cmd::Ingest { data } => commands::ingest(&ctx, &data),
        Cmd::Prune { data } => commands::prune(&ctx, &data),
        Cmd::Rank { data } => commands::rank(&ctx, &data),
        Cmd::Correlate { data, columns, threshold } => commands::correlate(&ctx, &data, columns, threshold),
        Cmd::Predict { data, model, sweep: _, top_n, max_n, train_fraction, normal_ci, plot_data } => commands::predict(
            &ctx,
            &data,
            commands::PredictArgs { model, top_n, max_n, train_fraction, normal_ci, plot_data },
        ),
        Cmd::Forecast { data, model, horizon, regions, features, max_lag, epochs, hidden } => commands::forecast(
            &ctx,
            &data,
            commands::ForecastArgs { model, horizon, regions, features, max_lag, epochs, hidden },
        ),
        Cmd::Ablate { data, mode, top, order, model, train_fraction, plot_data } => commands::ablate(
            &ctx,
            &data,
            commands::AblateArgs { mode, top, order, model, train_fraction, plot_data },
        ),
        Cmd::Adf { data, column, max_lag } => commands::adf(&ctx, &data, column, max_lag),
        Cmd::Cluster { data, k, linkage, profile, sample } => {
            commands::cluster(&ctx, &data, k, linkage, profile, sample)
        }
        Cmd::Dtw { a, b, column } => commands::dtw_cmd(&ctx, a, b, column),
    }
}

/// 2 when the failure traces back to bad input, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    use sympcast::evalharness::EvalError;
    use sympcast::tseries::TseriesError;
    use sympcast::{PanelError, RegressError};
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<PanelError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<RegressError>() {
            if matches!(e, RegressError::InvalidSpec(_)) {
                return 2;
            }
        }
        if let Some(EvalError::Invalid(_)) = cause.downcast_ref::<EvalError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<TseriesError>() {
            if matches!(e, TseriesError::SeriesTooShort(_) | TseriesError::InsufficientHistory { .. } | TseriesError::Invalid(_)) {
                return 2;
            }
        }
    }
    1
}

fn init_threads() {
    if let Ok(v) = std::env::var("SYMPCAST_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring SYMPCAST_THREADS={v:?}; expected a positive integer"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
