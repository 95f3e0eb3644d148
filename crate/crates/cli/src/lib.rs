//! Command-line surface of the term structure engine. `main.rs` only parses
//! arguments and sizes the worker pool; everything else lives here so tests
//! can drive subcommands in-process.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
pub mod output;

pub use commands::{run, Outcome};

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "LDTSM_WORKERS";

pub const DEFAULT_VALIDATION_PATHS: usize = 100_000;
pub const DEFAULT_VALIDATION_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(
    name = "ldtsm",
    version,
    about = "Density-driven term structure models: curves, simulation, validation, calibration",
    after_help = "Set LDTSM_WORKERS=N to fix the number of worker threads (default: all cores). \
                  Results do not depend on the worker count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Io {
    /// Scenario file (JSON)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory [default: outputs.dir of the scenario, "out" if unset]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Write `T,P,forward_rate` for each valuation time in the scenario
    Curve {
        #[command(flatten)]
        io: Io,
    },
    /// Simulate driver paths; writes per-path CSVs, curve evolution and a summary
    Simulate {
        #[command(flatten)]
        io: Io,
        /// Number of paths [default: simulation.paths of the scenario]
        #[arg(long)]
        paths: Option<usize>,
        /// Master seed [default: simulation.seed of the scenario]
        #[arg(long)]
        seed: Option<u64>,
        /// Grid steps over the horizon [default: horizon / grid.step]
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the built-in validation suite (and a martingale check of the scenario model, if given)
    Validate {
        /// Scenario file (JSON); optional
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Output directory [default: "out"]
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Monte Carlo paths per test
        #[arg(long, default_value_t = DEFAULT_VALIDATION_PATHS)]
        paths: usize,
        /// Master seed
        #[arg(long, default_value_t = DEFAULT_VALIDATION_SEED)]
        seed: u64,
        /// Skip the built-in suite and check only the scenario model
        #[arg(long)]
        scenario_only: bool,
    },
    /// Fit λ knots of a single-factor model to a discount curve (CSV `T,price`)
    Calibrate {
        #[command(flatten)]
        io: Io,
        /// Curve file [default: calibration.curve of the scenario]
        #[arg(long, value_name = "PATH")]
        curve: Option<PathBuf>,
        /// Root-finding tolerance on λ
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Write the driver density `x,p` at time t
    Density {
        #[command(flatten)]
        io: Io,
        /// Factor index in the scenario model
        #[arg(long, default_value_t = 0)]
        factor: usize,
        /// Time argument of the density
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        x_max: f64,
        /// Number of grid points, endpoints included
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long, value_enum, default_value_t = DensityMethod::Auto)]
        method: DensityMethod,
        /// Tail tolerance of the Fourier inversion
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMethod {
    /// Closed form when available, FFT otherwise
    Auto,
    Closed,
    Fft,
}
