//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fbnorm::Optimizer;

use crate::commands::{self, FitArgs, InitFile, Outcome, QuadArgs};
use crate::error::{exit, CliError, CliResult};
use crate::io::{load_data, load_params, read_text, write_atomic};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "FBNORM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fbnorm",
    version,
    about = "Fisher-Bingham normalizing constants, sampling and fitting on the sphere"
)]
pub struct Cli {
    /// Write the JSON run report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct QuadFlags {
    /// Quadrature nodes per side.
    #[arg(long, default_value_t = QuadArgs::default().n_points)]
    pub n_points: usize,
    #[arg(long, default_value_t = QuadArgs::default().omega_d)]
    pub omega_d: f64,
    #[arg(long, default_value_t = QuadArgs::default().omega_u)]
    pub omega_u: f64,
    /// Fixed contour distance left of min θ. Without it the contour goes
    /// through the saddle point.
    #[arg(long)]
    pub d: Option<f64>,
}

impl QuadFlags {
    fn args(&self) -> QuadArgs {
        QuadArgs {
            n_points: self.n_points,
            omega_d: self.omega_d,
            omega_u: self.omega_u,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Gd,
    Qn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalizing constant for a parameter file.
    Normconst {
        params: PathBuf,
        #[command(flatten)]
        quad: QuadFlags,
        /// Report only the log of the constant.
        #[arg(long)]
        log_only: bool,
    },
    /// Normalizing constant and its partial derivatives.
    Grad {
        params: PathBuf,
        #[command(flatten)]
        quad: QuadFlags,
    },
    /// Maximum-likelihood fit to unit vectors in a CSV file.
    Fit {
        data: PathBuf,
        #[arg(long, value_enum, default_value = "gd")]
        optimizer: OptimizerArg,
        #[arg(long, default_value_t = FitArgs::default().max_iter)]
        max_iter: usize,
        /// Gradient-norm convergence tolerance.
        #[arg(long, default_value_t = FitArgs::default().tol)]
        tol: f64,
        /// Also optimize the orthogonal frame.
        #[arg(long)]
        optimize_frame: bool,
        /// JSON file with starting `theta`, `gamma` and optional `o`.
        #[arg(long, value_name = "PATH")]
        init: Option<PathBuf>,
        #[command(flatten)]
        quad: QuadFlags,
    },
    /// Draw samples by rejection and write them as CSV.
    Sample {
        params: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Give up after this many proposals.
        #[arg(long, default_value_t = 1_000_000_000)]
        max_tries: u64,
    },
    /// Check the built-in reference values.
    Verify {
        /// Monte Carlo sample count for the stochastic check (0 skips it).
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: u64,
    },
    /// Time the normalizing constant over a range of dimensions.
    Bench {
        /// Comma-separated dimensions; default 10,20,...,200.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<usize>>,
        #[arg(long, default_value_t = 11)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `p,median_ms` rows here.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        quad: QuadFlags,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    // the global pool can only be built once per process
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .ok();
    Ok(())
}

pub fn execute(command: &Command) -> CliResult<Outcome> {
    match command {
        Command::Normconst {
            params,
            quad,
            log_only,
        } => commands::normconst(&load_params(params)?, &quad.args(), *log_only),
        Command::Grad { params, quad } => commands::grad(&load_params(params)?, &quad.args()),
        Command::Fit {
            data,
            optimizer,
            max_iter,
            tol,
            optimize_frame,
            init,
            quad,
        } => {
            let init = match init {
                Some(path) => Some(InitFile::parse(&read_text(path)?)?),
                None => None,
            };
            let args = FitArgs {
                optimizer: match optimizer {
                    OptimizerArg::Gd => Optimizer::GradientDescent,
                    OptimizerArg::Qn => Optimizer::QuasiNewton,
                },
                max_iter: *max_iter,
                tol: *tol,
                optimize_frame: *optimize_frame,
                init,
                quad: quad.args(),
            };
            commands::fit(&load_data(data)?, &args)
        }
        Command::Sample {
            params,
            n,
            seed,
            out,
            max_tries,
        } => commands::sample(&load_params(params)?, *n, *seed, *max_tries, out),
        Command::Verify { mc_samples } => commands::verify(*mc_samples),
        Command::Bench {
            p,
            repeats,
            seed,
            csv,
            quad,
        } => {
            let p_list = p
                .clone()
                .unwrap_or_else(|| (10..=200).step_by(10).collect());
            commands::bench(&p_list, &quad.args(), *repeats, *seed, csv.as_deref())
        }
    }
}

/// Parse, run and print. Returns the process exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::USAGE,
            };
            let text = e.render().to_string();
            if code == exit::OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let result = configure_threads().and_then(|()| {
        let start = Instant::now();
        let mut outcome = execute(&cli.command)?;
        outcome.report.timing_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.report.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let json = outcome.report.to_json();
            match &cli.report {
                Some(path) => {
                    if let Err(e) = write_atomic(path, format!("{json}\n").as_bytes()) {
                        let _ = writeln!(stderr, "error: {e}");
                        return e.exit_code();
                    }
                }
                None => {
                    let _ = writeln!(stdout, "{json}");
                }
            }
            if outcome.exit_code != exit::OK {
                let _ = writeln!(
                    stderr,
                    "error: {} finished with status {}",
                    outcome.report.command, outcome.report.status
                );
            }
            outcome.exit_code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(
        args,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
