//! `qtms` — command-line front end for the QTMS/TMN radar detection
//! simulator: configure a radar model, run seeded simulations, emit
//! ROC/histogram/series CSVs, evaluate and fit the analytic detection curves,
//! and run canned reproduction recipes.
//!
//! Exit codes: 0 success, 1 failed check or I/O problem, 2 usage/config
//! error, 3 numeric failure.

mod commands;
mod config;
mod manifest;
mod reproduce;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Top-level error with the exit-code mapping of the interface contract.
#[derive(Debug)]
pub enum CliError {
    /// Usage or configuration problem (exit 2).
    Config(String),
    /// Numeric evaluation failure (exit 3).
    Numeric(String),
    /// A reproduction or self-test check did not pass (exit 1).
    Check(String),
    /// Filesystem problem (exit 1).
    Io(std::io::Error),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn numeric(e: impl std::fmt::Display) -> Self {
        CliError::Numeric(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Check(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<qtms_core::signal_model::SignalModelError> for CliError {
    fn from(e: qtms_core::signal_model::SignalModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<qtms_core::sampler::SamplerError> for CliError {
    fn from(e: qtms_core::sampler::SamplerError) -> Self {
        use qtms_core::sampler::SamplerError::*;
        match e {
            NotPositiveSemidefinite(_) => CliError::Numeric(e.to_string()),
            InvalidSpec(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<qtms_core::detectors::DetectorError> for CliError {
    fn from(e: qtms_core::detectors::DetectorError) -> Self {
        use qtms_core::detectors::DetectorError::*;
        match e {
            TooFewSamples(_) => CliError::Config(e.to_string()),
            Sampler(inner) => inner.into(),
        }
    }
}

impl From<qtms_core::roc::RocError> for CliError {
    fn from(e: qtms_core::roc::RocError) -> Self {
        use qtms_core::roc::RocError::*;
        match e {
            NoInteriorMinimum => CliError::Numeric(e.to_string()),
            Io(inner) => CliError::Io(inner),
            MismatchedSeries(_) | EmptySeries | UnresolvablePfa { .. } | Csv { .. } => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<qtms_core::analytic::AnalyticError> for CliError {
    fn from(e: qtms_core::analytic::AnalyticError) -> Self {
        use qtms_core::analytic::AnalyticError::*;
        match e {
            InvalidModel(_) | InvalidThreshold(_) => CliError::Config(e.to_string()),
            NumericFailure(_) | NonConvergence(_) | Special(_) => CliError::Numeric(e.to_string()),
            Roc(inner) => inner.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qtms",
    version,
    about = "Statistical simulator for QTMS and TMN radar detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate detector series under the on and off conditions.
    Simulate {
        /// Run configuration file with the `model`, `window`, and `detector` sections.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `[window]` seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for series.csv and manifest.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads (affects speed only, never results).
        #[arg(long)]
        threads: Option<usize>,
        /// Also dump every raw sample to samples_on.csv / samples_off.csv.
        #[arg(long)]
        dump_samples: bool,
    },
    /// Simulate and build the empirical ROC curve.
    Roc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate the analytic ROC curve for an `[analytic]` model.
    Analytic {
        /// Config file with an `analytic` section (or use --n/--rho).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sample count N (alternative to --config).
        #[arg(long)]
        n: Option<f64>,
        /// Correlation coefficient rho in [0, 1).
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma1: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Comma-separated false-alarm targets (default: log grid 1e-4..0.5).
        #[arg(long, value_delimiter = ',')]
        pfa_grid: Option<Vec<f64>>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit the analytic family's rho to an existing roc.csv.
    Fit {
        /// Input curve in the roc.csv schema.
        #[arg(long)]
        roc_file: PathBuf,
        /// Nominal sample count of the fitting family.
        #[arg(long)]
        nominal_n: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Integration gain between two `[analytic]` configs (B relative to A).
    Gain {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        /// Comma-separated false-alarm targets (default: 1e-3,1e-2,1e-1).
        #[arg(long, value_delimiter = ',')]
        pfa_grid: Option<Vec<f64>>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a canned desk-scale reproduction recipe and check its contract.
    Reproduce {
        /// One of: fig9, fig12, fig13, fig14, fig15, fig16, fig17.
        #[arg(long)]
        figure: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Fast internal consistency checks.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            threads,
            dump_samples,
        } => with_threads(threads, || {
            commands::simulate(&config, seed, &out, dump_samples)
        }),
        Command::Roc {
            config,
            seed,
            out,
            threads,
        } => with_threads(threads, || commands::roc(&config, seed, &out)),
        Command::Analytic {
            config,
            n,
            rho,
            sigma1,
            sigma2,
            pfa_grid,
            out,
        } => commands::analytic(config.as_deref(), n, rho, sigma1, sigma2, pfa_grid, &out),
        Command::Fit {
            roc_file,
            nominal_n,
            out,
        } => commands::fit(&roc_file, nominal_n, &out),
        Command::Gain {
            config_a,
            config_b,
            pfa_grid,
            out,
            threads,
        } => with_threads(threads, || {
            commands::gain(&config_a, &config_b, pfa_grid, &out)
        }),
        Command::Reproduce {
            figure,
            seed,
            out,
            threads,
        } => with_threads(threads, || reproduce::run(&figure, seed, &out)),
        Command::Selftest { threads } => with_threads(threads, commands::selftest),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtms: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
