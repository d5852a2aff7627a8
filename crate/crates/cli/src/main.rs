//! `hhot`: slide, dataset and matrix distances from tile-embedding manifests.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunArgs;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const BUDGET: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Debug, Parser)]
#[command(
    name = "hhot",
    version,
    about = "Hierarchical optimal-transport distances between slides and datasets",
    after_help = "Every option can also be set through an HHOT_* environment variable \
                  (e.g. HHOT_EPSILON_INNER); command-line flags take precedence.\n\n\
                  Exit codes: 0 success, 2 invalid input, 3 solver did not converge, \
                  4 memory budget refused, 5 I/O failure."
)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Hhot,
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance between two slides.
    SlideDist {
        manifest_a: PathBuf,
        slide_a: String,
        manifest_b: PathBuf,
        slide_b: String,
        /// Also write the tile coupling as CSV.
        #[arg(long)]
        coupling: Option<PathBuf>,
    },
    /// Tile coupling between two slides (slide-dist with --coupling).
    Couple {
        manifest_a: PathBuf,
        slide_a: String,
        manifest_b: PathBuf,
        slide_b: String,
    },
    /// Hierarchical distance between two datasets.
    DatasetDist {
        manifest_a: PathBuf,
        manifest_b: PathBuf,
        /// Pool all tiles and solve once instead (subject to --memory-budget).
        #[arg(long)]
        flat: bool,
    },
    /// All-pairs slide distance matrix over the slides of every manifest.
    Matrix {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "hhot", env = "HHOT_METRIC")]
        metric: Metric,
    },
    /// Leave-one-out KNN accuracy over a distance matrix.
    Knn {
        matrix: PathBuf,
        /// `id,label` CSV; defaults to the matrix's companion labels file.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
    },
    /// Time hierarchical against flat dataset distances on synthetic data.
    Bench {
        #[arg(long, default_value_t = 4)]
        n_min: usize,
        #[arg(long, default_value_t = 18)]
        n_max: usize,
        /// Explicit slide counts, overriding --n-min/--n-max.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        tiles: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Regress transferability on dataset distance.
    Transfer {
        records: PathBuf,
        /// Fit one line over all records instead of one per target.
        #[arg(long)]
        pooled: bool,
        /// Output format; inferred from the --out extension when omitted.
        #[arg(long, value_enum)]
        format: Option<ReportFormat>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let code = match commands::run(&cli) {
        Ok(outcome) => {
            if outcome.converged {
                exit::OK
            } else {
                eprintln!(
                    "warning: {} solve(s) did not reach tolerance",
                    outcome.unconverged.max(1)
                );
                exit::NOT_CONVERGED
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    };
    ExitCode::from(code)
}
