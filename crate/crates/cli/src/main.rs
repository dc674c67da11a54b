//! Command-line front end: computes schedule/bound tables, runs the
//! constructive Gaussian experiment and LIBSVM logistic regression, analyses
//! continuous schedules, and prints the lower-bound comparison.
//!
//! Exit codes: 0 success, 1 validation/analysis failure, 2 I/O failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::Format;

/// Fixed default seed so every invocation is reproducible out of the box.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Parser)]
#[command(
    name = "stepsize-lab",
    about = "Optimal and near-optimal diminishing SGD step-size schedules, their convergence bounds, and simulations validating them",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct ParamArgs {
    /// Strong-convexity modulus μ
    #[arg(long = "mu")]
    mu: f64,
    /// Smoothness constant L
    #[arg(long = "L")]
    l: f64,
    /// Noise constant N = 2·E‖∇f(w*;ξ)‖²
    #[arg(long = "N")]
    n: f64,
    /// Initial expected squared distance Y0 = E‖w0 − w*‖²
    #[arg(long = "Y0")]
    y0: f64,
}

#[derive(clap::Args, Debug, Clone)]
struct OutputArgs {
    /// Output file (stdout when omitted)
    #[arg(long = "out")]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long = "format", value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal-schedule recursion Z_t with its step sizes and every
    /// closed-form bound, on a log grid
    Bounds {
        #[command(flatten)]
        params: ParamArgs,
        /// Last iteration of the grid
        #[arg(long = "t-max", default_value_t = 10_000)]
        t_max: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo runs on the constructive Gaussian model against its
    /// deterministic rate and the lower/upper bounds
    Tightness {
        /// Sample count n; the model uses μ = 1/n
        #[arg(long = "n", default_value_t = 1000)]
        n: u64,
        /// Dimension of the Gaussian
        #[arg(long = "d", default_value_t = 10)]
        d: usize,
        /// Iterations per run
        #[arg(long = "t-max", default_value_t = 100_000)]
        t_max: u64,
        /// Independent runs to average
        #[arg(long = "runs", default_value_t = 10)]
        runs: u32,
        /// Master seed (runs derive their own streams from it)
        #[arg(long = "seed", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Step-size family: approx | optimal | gower | power
        #[arg(long = "family", default_value = "approx")]
        family: String,
        /// Exponent for the power family
        #[arg(long = "q")]
        q: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// ℓ2-regularized logistic regression on a LIBSVM file: reference
    /// optimum, estimated constants, and SGD under the 2/(μt+4L) schedule
    Logreg {
        /// LIBSVM file (gzip transparently decompressed for .gz)
        #[arg(long = "dataset")]
        dataset: PathBuf,
        #[arg(long = "t-max", default_value_t = 20_000)]
        t_max: u64,
        #[arg(long = "runs", default_value_t = 10)]
        runs: u32,
        #[arg(long = "seed", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Reference-solver stopping tolerance on ‖∇F‖²
        #[arg(long = "tol", default_value_t = 1e-16)]
        tol: f64,
        /// Optional per-feature max-abs scaling before training
        #[arg(long = "scale-features", default_value_t = false)]
        scale_features: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Continuous-schedule diagnostics n, M, C, the C/n crossing, the rate
    /// bound, and power-law family comparison
    Schedule {
        #[command(flatten)]
        params: ParamArgs,
        /// Analyzed family: approx | power (power reads the first --q value)
        #[arg(long = "family", default_value = "approx")]
        family: String,
        /// Power-law exponents to compare (comma separated, each in (0,1])
        #[arg(long = "q", value_delimiter = ',')]
        q: Vec<f64>,
        /// Exponent for the Σ1/(t·lnᵏt) divergence test
        #[arg(long = "k")]
        k: Option<f64>,
        #[arg(long = "t-max", default_value_t = 100_000)]
        t_max: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Lower-bound constants: the dimension-free coefficient 1/2 against the
    /// prior dimension-dependent constant, their gap, and the composite
    /// factor with the schedule-optimality 32
    Compare {
        /// Problem dimension d
        #[arg(long = "d", default_value_t = 1)]
        d: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bounds {
            params,
            t_max,
            output,
        } => commands::bounds(&params, t_max, &output),
        Command::Tightness {
            n,
            d,
            t_max,
            runs,
            seed,
            family,
            q,
            output,
        } => commands::tightness(n, d, t_max, runs, seed, &family, q, &output),
        Command::Logreg {
            dataset,
            t_max,
            runs,
            seed,
            tol,
            scale_features,
            output,
        } => commands::logreg(&dataset, t_max, runs, seed, tol, scale_features, &output),
        Command::Schedule {
            params,
            family,
            q,
            k,
            t_max,
            output,
        } => commands::schedule(&params, &family, &q, k, t_max, &output),
        Command::Compare { d, output } => commands::compare(d, &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
