//! The `esg` command: tuple validation, estimator statistics, exact
//! multilinear values, single descents and full experiments.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use esg_core::estimators::{estimate_mean_and_variance, EstimatorSpec};
use esg_core::exact::{multilinear_value_and_gradient, ProbVector};
use esg_core::harness::{DescendSpec, ExperimentSpec};
use esg_core::oracles::ProblemSpec;
use esg_core::rng::substream;
use esg_core::tuples::{convolution_check, probability_grid, score_grid, validate_tuple, GoodTuple, ValidationMethod};
use esg_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Exact gradients are printed up to this dimension.
const EXACT_PRINT_DIM: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "esg", version, about = "Single-query stochastic gradients for black-box binary objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the calibration and convolution identities of a shipped tuple.
    ValidateTuple {
        /// spike, arch, cosine, bigauss_cosine or longjump.
        name: String,
        /// Maximum allowed residual; defaults to 1e-6 (1e-5 for bigauss_cosine).
        #[arg(long)]
        tol: Option<f64>,
        /// Use this many Monte Carlo samples per grid point instead of quadrature.
        #[arg(long)]
        monte_carlo: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample an estimator repeatedly at a fixed point and report its moments.
    Estimate {
        /// esg:<tuple>, encoded_esg:<tuple>, naive, reinforce, arm or disarm.
        estimator: String,
        /// slice:<d>, knapsack:<d> or table:<path>.
        problem: String,
        /// Comma-separated probabilities; defaults to all 1/2.
        #[arg(long)]
        x: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a single descent from a TOML config and write its trajectory.
    Descend { config: PathBuf },
    /// Run a multi-trial experiment from a TOML spec and write CSV and SVG.
    Experiment { spec: PathBuf },
    /// Print the multilinear extension and its gradient by enumeration.
    Exact {
        problem: String,
        #[arg(long)]
        x: Option<String>,
        /// Seed for problem randomness such as knapsack weights.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Validation(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Runtime(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn point(x: Option<&str>, dim: usize) -> esg_core::Result<ProbVector> {
    let x = match x {
        Some(s) => s.parse::<ProbVector>()?,
        None => ProbVector::filled(dim, 0.5)?,
    };
    if x.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: x.dim() });
    }
    Ok(x)
}

fn validate(out: &mut dyn Write, name: &str, tol: Option<f64>, monte_carlo: Option<usize>, seed: u64) -> Outcome {
    let tuple = GoodTuple::by_name(name)?;
    let tol = tol.unwrap_or(if tuple.name() == "bigauss_cosine" { 1e-5 } else { 1e-6 });
    let method = match monte_carlo {
        Some(samples) => ValidationMethod::MonteCarlo { samples, seed },
        None => ValidationMethod::Quadrature,
    };
    let report = validate_tuple(&tuple, &probability_grid(), method)?;
    let mut ok = report.passes(tol);
    let _ = writeln!(out, "tuple: {}", tuple.name());
    let _ = writeln!(out, "calibration max residual: {:e} (tolerance {tol:e})", report.max_residual);
    match convolution_check(&tuple, &score_grid(&tuple, 99)) {
        Ok(residual) => {
            ok &= residual <= tol;
            let _ = writeln!(out, "convolution max residual: {residual:e} (tolerance {tol:e})");
        }
        Err(Error::NoDensity(sigma)) => {
            let _ = writeln!(out, "convolution check skipped: noise {sigma} has no density");
        }
        Err(e) => return Err(e.into()),
    }
    let _ = writeln!(out, "result: {}", if ok { "pass" } else { "FAIL" });
    if ok {
        Ok(())
    } else {
        Err(Failure::Validation(format!("tuple {} exceeds tolerance {tol:e}", tuple.name())))
    }
}

fn estimate(out: &mut dyn Write, estimator: &str, problem: &str, x: Option<&str>, samples: usize, seed: u64) -> Outcome {
    let spec: EstimatorSpec = estimator.parse()?;
    let problem: ProblemSpec = problem.parse()?;
    let oracle = problem.instantiate(&mut substream(seed, 1))?;
    let x = point(x, oracle.dim())?;
    let s = estimate_mean_and_variance(&spec, &x, &oracle, samples, &mut substream(seed, 0))?;
    let _ = writeln!(out, "estimator: {spec}");
    let _ = writeln!(out, "problem: {problem}");
    let _ = writeln!(out, "x: {}", join(&x));
    if spec.is_encoded() {
        let _ = writeln!(out, "gradient space: encoding (e = inverse encoding of x)");
    }
    let _ = writeln!(out, "samples: {}", s.n_samples);
    let _ = writeln!(out, "mean gradient: {}", join(&s.mean_gradient));
    let _ = writeln!(out, "variance: {}", join(&s.gradient_variance));
    let _ = writeln!(out, "std-err: {}", join(&s.gradient_std_err));
    if let (Some(v), Some(se)) = (s.mean_value, s.value_std_err) {
        let _ = writeln!(out, "mean value: {v} (std-err {se})");
    }
    let _ = writeln!(out, "key frequency: {}", join(&s.key_frequency));
    if oracle.dim() <= EXACT_PRINT_DIM {
        let (v, g) = multilinear_value_and_gradient(&x, &oracle)?;
        let _ = writeln!(out, "exact value: {v}");
        let _ = writeln!(out, "exact gradient: {}", join(&g));
    }
    let _ = writeln!(out, "queries: {}", s.total_queries);
    Ok(())
}

fn exact(out: &mut dyn Write, problem: &str, x: Option<&str>, seed: u64) -> Outcome {
    let problem: ProblemSpec = problem.parse()?;
    let oracle = problem.instantiate(&mut substream(seed, 1))?;
    let x = point(x, oracle.dim())?;
    let (v, g) = multilinear_value_and_gradient(&x, &oracle)?;
    let _ = writeln!(out, "value: {v}");
    let _ = writeln!(out, "gradient: {}", join(&g));
    Ok(())
}

fn descend(out: &mut dyn Write, config: &Path) -> Outcome {
    let spec = DescendSpec::from_file(config)?;
    let traj = spec.run()?;
    let _ = writeln!(out, "estimator: {}", spec.config.estimator);
    let _ = writeln!(out, "steps: {}", traj.records.len());
    let _ = writeln!(out, "oracle calls: {}", traj.total_calls());
    let _ = writeln!(out, "best so far: {}", traj.final_best().unwrap_or(f64::NAN));
    let _ = writeln!(out, "final x: {}", join(&traj.final_x));
    let _ = writeln!(out, "trajectory: {}", spec.output.display());
    Ok(())
}

fn experiment(out: &mut dyn Write, spec: &Path) -> Outcome {
    let spec = ExperimentSpec::from_file(spec)?;
    let result = esg_core::harness::run_experiment(&spec)?;
    for m in &result.series.methods {
        if let Some(last) = m.points.last() {
            let _ = writeln!(
                out,
                "{}: median best {} (p25 {}, p75 {}) after {} calls",
                m.method, last.median, last.p25, last.p75, last.oracle_calls
            );
        }
    }
    let _ = writeln!(out, "csv: {}", spec.output_dir.join("aggregate.csv").display());
    let _ = writeln!(out, "plot: {}", spec.output_dir.join("aggregate.svg").display());
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::ValidateTuple { name, tol, monte_carlo, seed } => validate(out, name, *tol, *monte_carlo, *seed),
        Command::Estimate { estimator, problem, x, samples, seed } => {
            estimate(out, estimator, problem, x.as_deref(), *samples, *seed)
        }
        Command::Descend { config } => descend(out, config),
        Command::Experiment { spec } => experiment(out, spec),
        Command::Exact { problem, x, seed } => exact(out, problem, x.as_deref(), *seed),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Validation(msg)) => {
            let _ = writeln!(err, "validation failed: {msg}");
            EXIT_VALIDATION
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}
