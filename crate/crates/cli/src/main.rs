//! `rf-fingerprint`: RSSI fingerprint localization from the command line.

mod commands;
mod config;
mod error;
mod fetch;
mod report;
mod svg;

use clap::{Parser, Subcommand, ValueEnum};
use config::{DataArgs, GridArgs, ModelArgs, RunConfig};
use error::CliError;
use rff_core::Target;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rf-fingerprint", version, about = "kNN fingerprint localization on LPWAN RSSI data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Validation,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Message, basestation and RSSI counts plus a histogram CSV.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        /// Histogram bin width in dB.
        #[arg(long, default_value_t = 1.0)]
        bin_width: f64,
        /// Histogram output [default: <out-dir>/histogram.csv].
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Write a train/validation/test split file.
    Split {
        #[command(flatten)]
        data: DataArgs,
        /// Number of rows, instead of reading the dataset.
        #[arg(long)]
        n: Option<usize>,
        /// Convert a published split file instead of generating one.
        #[arg(long)]
        from_zenodo: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one configuration on the validation (or, with --final, test) set.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "validation")]
        target: TargetArg,
        /// Required for --target test.
        #[arg(long = "final")]
        is_final: bool,
    },
    /// Scan hyperparameters on the validation set; writes CSV and SVG.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Suffix for output file names [default: current UTC time].
        #[arg(long)]
        stamp: Option<String>,
    },
    /// Markdown report over the result CSVs in a directory.
    Report {
        dir: PathBuf,
        /// Output file [default: <dir>/report.md].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dataset DOIs and verify SHA-256 checksums of downloaded files.
    Fetch {
        #[arg(long)]
        verify: Vec<PathBuf>,
        #[arg(long)]
        sha256: Option<String>,
        /// File in `sha256sum` format.
        #[arg(long)]
        checksums: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let none_model = ModelArgs::default();
    let none_grid = GridArgs::default();
    match cli.command {
        Command::Stats {
            data,
            bin_width,
            histogram,
        } => commands::stats(&RunConfig::resolve(&data, &none_model, &none_grid)?, bin_width, histogram),
        Command::Split {
            data,
            n,
            from_zenodo,
            out,
        } => {
            let cfg = RunConfig::resolve(&data, &none_model, &none_grid)?;
            commands::split(&cfg, n, from_zenodo.as_deref(), data.data.is_some(), &out)
        }
        Command::Eval {
            data,
            model,
            target,
            is_final,
        } => {
            let target = match target {
                TargetArg::Validation => Target::Validation,
                TargetArg::Test => Target::Test,
            };
            commands::eval(&RunConfig::resolve(&data, &model, &none_grid)?, target, is_final)
        }
        Command::Sweep {
            data,
            model,
            grid,
            stamp,
        } => {
            let stamp = stamp.unwrap_or_else(|| chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string());
            commands::sweep(&RunConfig::resolve(&data, &model, &grid)?, &stamp)
        }
        Command::Report { dir, out } => report::report(&dir, out.as_deref()),
        Command::Fetch {
            verify,
            sha256,
            checksums,
        } => fetch::fetch(&verify, sha256.as_deref(), checksums.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // the panic message has already been printed by the default hook
        Err(_) => ExitCode::from(3),
    }
}
