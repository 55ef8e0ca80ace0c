//! Command-line front end for `gdpe`.
//!
//! Exit codes: 0 success, 1 a verifier failed, 2 usage or input error,
//! 3 the solver ran out of iterations.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::config::{
    parse_boundary, parse_extents, parse_normalization, parse_preconditioner, parse_size_list, Command,
    DomainSpec, GenerateKind, InputRole, RunConfig, VerifyTarget,
};
pub use crate::error::{CliError, EXIT_NON_CONVERGENCE, EXIT_PASS, EXIT_USAGE, EXIT_VERIFICATION};

/// Environment variable capping worker threads; 0 or unset means automatic.
pub const THREADS_ENV: &str = "GDPE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "gdpe", version, about = "Generalized discrete Poisson equation toolkit")]
pub struct Cli {
    /// More diagnostics on stderr.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    /// Write the normalized run configuration here before running.
    #[arg(long, global = true, value_name = "PATH")]
    save_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Write a coefficient or field file.
    Generate(GenerateArgs),
    /// g = L f.
    Apply(ApplyArgs),
    /// Solve L f = g by conjugate gradients.
    Solve(SolveArgs),
    /// Run one verifier, or `all`.
    Verify(VerifyArgs),
    /// Time apply and dft; CSV on stdout or --output.
    Bench(BenchArgs),
    /// Re-run a configuration saved with --save-config.
    Replay { config: PathBuf },
}

#[derive(Args, Debug)]
struct DomainArgs {
    /// Extents as N1xN2x...xNd.
    #[arg(long)]
    extents: String,
    #[arg(long, default_value = "periodic", value_name = "periodic|zero")]
    boundary: String,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// coeff-identity, coeff-random, rhs-random-compatible or field-random.
    kind: String,
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale of coeff-identity.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Declared lower spectral bound of coeff-random.
    #[arg(long, default_value_t = 0.5)]
    lower: f64,
    /// Declared upper spectral bound of coeff-random.
    #[arg(long, default_value_t = 2.0)]
    upper: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[arg(long)]
    coeff: PathBuf,
    #[arg(long)]
    field: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Iteration budget; default 10 N.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[arg(long, default_value = "none", value_name = "none|fft-mean")]
    precond: String,
    /// Reject right-hand sides with non-zero mean instead of projecting them.
    #[arg(long)]
    no_project: bool,
    #[arg(long, default_value = "mean-zero", value_name = "mean-zero|anchor-site-zero")]
    normalization: String,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    coeff: PathBuf,
    #[arg(long)]
    rhs: PathBuf,
    /// Initial guess; default zero.
    #[arg(long)]
    initial: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Solve report path; default stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Theorem tag or `all`.
    which: String,
    #[arg(long)]
    coeff: PathBuf,
    /// Test field; default random from --seed.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Right-hand side for uniqueness; default random mean-zero from --seed.
    #[arg(long)]
    rhs: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `all` skips the dense kernel check above this many sites.
    #[arg(long, default_value_t = 512)]
    kernel_cap: usize,
    /// Also write the report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated extents, e.g. 32x32,64x64.
    #[arg(long, default_value = "16x16,32x32,64x64")]
    sizes: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl SolverArgs {
    fn apply_to(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        cfg.solver.max_iterations = self.max_iter;
        cfg.solver.rel_tolerance = self.rel_tol;
        cfg.solver.preconditioner = parse_preconditioner(&self.precond)?;
        cfg.solver.auto_project_rhs = !self.no_project;
        cfg.solver.normalization = parse_normalization(&self.normalization)?;
        Ok(())
    }
}

impl Cli {
    /// The [`RunConfig`] this invocation describes.
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let mut cfg = match self.command {
            Sub::Replay { config } => RunConfig::from_text(&fs::read_to_string(config)?)?,
            Sub::Generate(a) => {
                let kind: GenerateKind = a.kind.parse()?;
                let mut cfg = RunConfig::new(Command::Generate {
                    kind,
                    scale: a.scale,
                    lower: a.lower,
                    upper: a.upper,
                });
                cfg.domain = Some(DomainSpec {
                    extents: parse_extents(&a.domain.extents)?,
                    boundary: parse_boundary(&a.domain.boundary)?,
                });
                cfg.seed = a.seed;
                cfg.output = Some(a.output);
                cfg
            }
            Sub::Apply(a) => {
                let mut cfg = RunConfig::new(Command::Apply);
                cfg.inputs.push((InputRole::Coefficients, a.coeff));
                cfg.inputs.push((InputRole::Field, a.field));
                cfg.output = Some(a.output);
                cfg
            }
            Sub::Solve(a) => {
                let mut cfg = RunConfig::new(Command::Solve);
                cfg.inputs.push((InputRole::Coefficients, a.coeff));
                cfg.inputs.push((InputRole::Rhs, a.rhs));
                if let Some(p) = a.initial {
                    cfg.inputs.push((InputRole::Initial, p));
                }
                cfg.output = Some(a.output);
                cfg.report = a.report;
                a.solver.apply_to(&mut cfg)?;
                cfg
            }
            Sub::Verify(a) => {
                let target: VerifyTarget = a.which.parse()?;
                let mut cfg = RunConfig::new(Command::Verify {
                    target,
                    trials: a.trials,
                    kernel_cap: a.kernel_cap,
                });
                cfg.inputs.push((InputRole::Coefficients, a.coeff));
                if let Some(p) = a.field {
                    cfg.inputs.push((InputRole::Field, p));
                }
                if let Some(p) = a.rhs {
                    cfg.inputs.push((InputRole::Rhs, p));
                }
                cfg.seed = a.seed;
                cfg.report = a.report;
                a.solver.apply_to(&mut cfg)?;
                cfg
            }
            Sub::Bench(a) => {
                let mut cfg = RunConfig::new(Command::Bench {
                    sizes: parse_size_list(&a.sizes)?,
                    reps: a.reps,
                });
                cfg.seed = a.seed;
                cfg.output = a.output;
                cfg
            }
        };
        cfg.verbosity = cfg.verbosity.max(self.verbose);
        if let Some(path) = self.save_config {
            fs::write(path, cfg.to_text())?;
        }
        Ok(cfg)
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'")))?,
        _ => 0,
    };
    if threads > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let result = configure_threads()
        .and_then(|_| cli.into_config())
        .and_then(|cfg| commands::execute(&cfg, out));
    match result {
        Ok(()) => EXIT_PASS,
        Err(e) => {
            eprintln!("gdpe: {e}");
            e.exit_code()
        }
    }
}
