//! `swm`: batch front end for sparse Wishart mixture clustering. Simulates
//! datasets, fits and selects models, scores results against ground truth,
//! and exports heatmap data, all through stable on-disk formats.
//!
//! Exit codes: 0 success, 1 runtime or convergence failure, 2 validation
//! error. Log verbosity comes from `SWM_LOG` (error, warn, info, debug).

mod artifacts;
mod commands;
mod config;
mod dataio;
mod error;
mod jsonio;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(name = "swm", version, about = "Sparse Wishart mixture clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a mixture spec and write it with a truth sidecar.
    Simulate {
        /// Simulation spec JSON (n, p, tau, dofs, sigmas, seed).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit one model at a fixed K and lambda.
    Fit {
        /// Dataset directory (manifest.json plus matrix payload).
        #[arg(long)]
        data: PathBuf,
        /// Run configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output fit result JSON file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// allones, prior:<path>, or explicit:<path>.
        #[arg(long)]
        penalty: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Search a (K, lambda) grid and keep the best fit by BIC.
    Select {
        /// Dataset directory (manifest.json plus matrix payload).
        #[arg(long)]
        data: PathBuf,
        /// Run configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for selection.csv and best_fit.json.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated cluster counts, e.g. 2,3,4.
        #[arg(long)]
        k_grid: Option<String>,
        /// Comma-separated values or auto:<count>.
        #[arg(long)]
        lambda_grid: Option<String>,
        /// allones, prior:<path>, or explicit:<path>.
        #[arg(long)]
        penalty: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score a fit against the truth sidecar of a simulated dataset.
    Evaluate {
        /// Dataset directory holding truth.json.
        #[arg(long)]
        data: PathBuf,
        /// Fit result JSON to score.
        #[arg(value_name = "FIT_FILE")]
        fit: PathBuf,
        /// Output metrics JSON file.
        #[arg(long)]
        out: PathBuf,
        /// Count diagonal entries in the F1 support score.
        #[arg(long)]
        include_diagonal_f1: bool,
    },
    /// Dump one component's scale matrix as CSV with a zero mask.
    ExportHeatmap {
        /// Fit result JSON.
        #[arg(value_name = "FIT_FILE")]
        fit: PathBuf,
        /// Component index, 0-based.
        #[arg(value_name = "COMPONENT")]
        component: usize,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> error::Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
        Command::Fit {
            data,
            config,
            out,
            k,
            lambda,
            penalty,
            restarts,
            seed,
            workers,
        } => {
            let flags = Overrides {
                k,
                lambda,
                penalty,
                restarts,
                seed,
                workers,
                ..Overrides::default()
            };
            commands::fit(&data, config.as_deref(), &flags, &out)
        }
        Command::Select {
            data,
            config,
            out,
            k_grid,
            lambda_grid,
            penalty,
            restarts,
            seed,
            workers,
        } => {
            let flags = Overrides {
                k_grid,
                lambda_grid,
                penalty,
                restarts,
                seed,
                workers,
                ..Overrides::default()
            };
            commands::select(&data, config.as_deref(), &flags, &out)
        }
        Command::Evaluate {
            data,
            fit,
            out,
            include_diagonal_f1,
        } => commands::evaluate(&data, &fit, include_diagonal_f1, &out),
        Command::ExportHeatmap { fit, component, out } => {
            commands::export_heatmap(&fit, component, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SWM_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
