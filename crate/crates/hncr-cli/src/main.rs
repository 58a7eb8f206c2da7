//! `hncr` — pipeline driver for the hyperbolic recommender: prepare
//! neighbor sets, train, evaluate, rank, analyze. Exit codes: 0 ok,
//! 2 input error, 3 training failure, 4 artifact incompatibility.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing inputs (config, dataset, artifacts).
    Input(String),
    /// Training aborted (divergence).
    Training(String),
    /// Artifacts exist but do not fit each other or the dataset.
    Incompatible(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Training(_) => 3,
            CliError::Incompatible(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Training(m) | CliError::Incompatible(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hncr",
    version,
    about = "Hyperbolic neural collaborative recommender pipeline"
)]
struct Cli {
    /// TOML run configuration; flags below override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_parser = ["hyperbolic", "euclidean"])]
    backend: Option<String>,

    /// Relational-graph edge weighting.
    #[arg(long, global = true, value_parser = ["paper", "common", "none"])]
    weight_mode: Option<String>,

    /// Semantic (latent-space k-NN) or direct co-occurrence neighbors.
    #[arg(long, global = true, value_parser = ["semantic", "cooccurrence"])]
    neighbor_mode: Option<String>,

    /// Disable a model component; repeatable.
    #[arg(long, global = true, value_parser = ["no_semantic", "no_history", "uniform_attention"])]
    ablate: Vec<String>,

    /// Evaluation repeats with derived seeds; the mean is reported.
    #[arg(long, global = true)]
    repeats: Option<usize>,

    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build neighbor sets (and latent dumps) from the train split.
    Prepare,
    /// Train a model; saves the best-validation checkpoint and trace.
    Train,
    /// CTR (AUC/ACC) and top-K (P@K/R@K) metrics on the test split.
    Evaluate {
        /// Defaults to <out>/checkpoint.json.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Write per-user top-N recommendation lists.
    Rank {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Degree histograms, sparsity bins, hierarchy groups, scatter CSVs.
    Analyze {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), CliError> {
    match std::env::var("HNCR_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| {
                    CliError::Input(format!("HNCR_THREADS must be a positive integer, got \"{v}\""))
                })?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Input(format!("cannot size thread pool: {e}")))
        }
        Err(_) => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let over = Overrides {
        seed: cli.seed,
        backend: cli.backend,
        weight_mode: cli.weight_mode,
        neighbor_mode: cli.neighbor_mode,
        ablate: cli.ablate,
        repeats: cli.repeats,
        out: cli.out,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &over)?;
    match &cli.cmd {
        Cmd::Prepare => commands::cmd_prepare(&cfg),
        Cmd::Train => commands::cmd_train(&cfg),
        Cmd::Evaluate { checkpoint } => commands::cmd_evaluate(&cfg, checkpoint.as_deref()),
        Cmd::Rank { checkpoint } => commands::cmd_rank(&cfg, checkpoint.as_deref()),
        Cmd::Analyze { checkpoint } => commands::cmd_analyze(&cfg, checkpoint.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
