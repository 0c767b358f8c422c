//! Command-line front end.
//!
//! Exit codes: `0` converged (or success), `1` usage or I/O error,
//! `2` iteration cap reached, `3` line search failed, `4` gradient check
//! failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use crate::io::{self, BundleError};
use crate::model::{
    validate_problem, InitPolicy, ProblemInstance, SolveReport, SolverConfig, Termination,
};
use crate::objective::{evaluate, finite_difference_gradient, gradient_rel_error};
use crate::optimizer::{multistart, random_angles, solve};

const BUNDLE_HELP: &str = "\
INPUT FORMAT (BUNDLE):
  Plain text. Lines starting with '#' are comments. Each matrix is a block of
  rows, one row per line, entries separated by whitespace or commas. Blocks
  are separated by blank lines. All matrices must be square, of equal size,
  symmetric, with unit diagonal and entries in [-1, 1]. Angle files (--init)
  use the same format with a single n x (k-1) block.

EXIT CODES:
  0 converged / success, 1 usage or I/O error, 2 iteration cap reached,
  3 line search failed, 4 gradient check failed";

#[derive(Debug, Parser)]
#[command(
    name = "rankcorr",
    version,
    about = "Nearest low-rank correlation matrix to a set of sampled correlation matrices",
    after_help = BUNDLE_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the nearest rank-k correlation matrix.
    Solve(SolveArgs),
    /// Compare the analytic gradient with central differences.
    Checkgrad(CheckgradArgs),
    /// Print IT / CPU / GN / ERR rows for several ranks.
    Table(TableArgs),
    /// Validate the input matrices and rank bound.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// BUNDLE file with the target matrices.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Embedded example problem: example31 or example32.
    #[arg(long)]
    fixture: Option<String>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Stop when the gradient Frobenius norm falls below this.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Backtracking ratio.
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    /// Sufficient-decrease constant.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Curvature constant.
    #[arg(long, default_value_t = 0.4)]
    sigma: f64,
    #[arg(long, default_value_t = 60)]
    max_backtrack: u32,
    /// Restart with steepest descent every N iterations.
    #[arg(long)]
    restart_period: Option<usize>,
    /// Do not replace non-descent directions by the negative gradient.
    #[arg(long)]
    no_safeguard: bool,
    /// Never try steps longer than 1 in the line search.
    #[arg(long)]
    no_expansion: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            delta: self.delta,
            sigma: self.sigma,
            tol: self.tol,
            max_iter: self.max_iter,
            max_backtrack: self.max_backtrack,
            restart_period: self.restart_period,
            descent_safeguard: !self.no_safeguard,
            allow_expansion: !self.no_expansion,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    /// Rank bound k, 1 <= k < n.
    #[arg(long)]
    rank: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Starting angles (n x (k-1) BUNDLE block). Without --init, --seed or
    /// --multistart a fixture's published start is used when it exists,
    /// otherwise seed 0.
    #[arg(long, conflicts_with = "seed")]
    init: Option<PathBuf>,
    /// Seed for uniform [0, 1) starting angles; base seed for --multistart.
    #[arg(long)]
    seed: Option<u64>,
    /// Run N seeded starts and keep the best.
    #[arg(long, conflicts_with = "init")]
    multistart: Option<usize>,
    /// Write the solution matrix here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the convergence trace (CSV) here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckgradArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    rank: usize,
    /// Number of random angle matrices.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-6)]
    h: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add a relative error to the analytic gradient (negative control).
    #[arg(long, hide = true)]
    perturb: bool,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[arg(long)]
    fixture: String,
    /// Comma-separated ranks, e.g. 2,3,4,5.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    ranks: Vec<usize>,
    /// Seed for ranks without a published start.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    rank: usize,
}

#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Checkgrad(a) => cmd_checkgrad(a, out),
        Command::Table(a) => cmd_table(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

struct Loaded {
    targets: Vec<Array2<f64>>,
    fixture: Option<io::Fixture>,
}

fn load(source: &Source) -> Result<Loaded, BundleError> {
    match (&source.input, &source.fixture) {
        (Some(path), _) => Ok(Loaded {
            targets: io::read_bundle(path)?,
            fixture: None,
        }),
        (None, Some(name)) => {
            let f = io::load_fixture(name)?;
            Ok(Loaded {
                targets: f.targets.clone(),
                fixture: Some(f),
            })
        }
        (None, None) => unreachable!("clap enforces one source"),
    }
}

fn exit_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => 0,
        Termination::MaxIter => 2,
        Termination::LineSearchFailed => 3,
    }
}

fn summary(r: &SolveReport) -> String {
    format!(
        "{} {} {} {} {}",
        r.termination,
        r.iterations,
        io::format_value(r.final_objective()),
        io::format_value(r.final_grad_norm()),
        io::format_value(r.final_rel_residual())
    )
}

fn cmd_solve(a: SolveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&a.source)?;
    let instance = validate_problem(&loaded.targets, a.rank)?;
    let config = a.solver.config();
    config.validate()?;

    let report = if let Some(starts) = a.multistart {
        if starts == 0 {
            return Err(Failure("--multistart needs at least one start".into()));
        }
        let base = a.seed.unwrap_or(0);
        let seeds: Vec<u64> = (0..starts as u64).map(|i| base + i).collect();
        let ms = multistart(&instance, &config, &seeds)?;
        for (i, r) in ms.runs.iter().enumerate() {
            writeln!(out, "start {i} seed {}: {}", seeds[i], summary(r))?;
        }
        writeln!(out, "best start {}", ms.best)?;
        ms.runs.into_iter().nth(ms.best).expect("best index in range")
    } else {
        let init = initial_policy(&a, &instance, loaded.fixture.as_ref())?;
        solve(&instance, &config.with_init(init))?
    };
    writeln!(out, "{}", summary(&report))?;
    io::write_solution(&report, a.out.as_deref(), a.trace.as_deref())?;
    Ok(exit_code(report.termination))
}

fn initial_policy(
    a: &SolveArgs,
    instance: &ProblemInstance,
    fixture: Option<&io::Fixture>,
) -> Result<InitPolicy, Failure> {
    if let Some(path) = &a.init {
        let alpha = io::read_angles(path, instance.n(), instance.angle_cols())?;
        return Ok(InitPolicy::Explicit(alpha));
    }
    if let Some(seed) = a.seed {
        return Ok(InitPolicy::Random { seed });
    }
    Ok(fixture
        .and_then(|f| f.init_for(instance.k()))
        .map(|alpha| InitPolicy::Explicit(alpha.clone()))
        .unwrap_or(InitPolicy::Random { seed: 0 }))
}

pub const CHECKGRAD_THRESHOLD: f64 = 1e-6;

fn cmd_checkgrad(a: CheckgradArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&a.source)?;
    let instance = validate_problem(&loaded.targets, a.rank)?;
    if a.h.is_nan() || a.h <= 0.0 {
        return Err(Failure("--h must be positive".into()));
    }
    let (n, cols) = (instance.n(), instance.angle_cols());
    let mut worst = 0.0_f64;
    for s in 0..a.samples as u64 {
        // Spread the angles over [-π, π).
        let raw = random_angles(n, cols, a.seed.wrapping_add(s));
        let alpha = crate::model::AngleMatrix::new(
            raw.as_array()
                .mapv(|u| (2.0 * u - 1.0) * std::f64::consts::PI),
        )?;
        let mut analytic = evaluate(&instance, &alpha).gradient;
        if a.perturb {
            analytic.mapv_inplace(|g| g * (1.0 + 1e-3) + 1e-3);
        }
        let fd = finite_difference_gradient(&instance, &alpha, a.h);
        worst = worst.max(gradient_rel_error(&analytic, &fd));
    }
    let pass = worst < CHECKGRAD_THRESHOLD;
    writeln!(
        out,
        "samples {} max_rel_error {} {}",
        a.samples,
        io::format_value(worst),
        if pass { "pass" } else { "FAIL" }
    )?;
    Ok(if pass { 0 } else { 4 })
}

fn cmd_table(a: TableArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if a.ranks.is_empty() {
        return Err(Failure("--ranks must list at least one rank".into()));
    }
    let fixture = io::load_fixture(&a.fixture)?;
    let config = a.solver.config();
    config.validate()?;
    let mut rows: Vec<(usize, SolveReport)> = Vec::new();
    for &k in &a.ranks {
        let instance = fixture.instance(k)?;
        let init = fixture
            .init_for(k)
            .map(|alpha| InitPolicy::Explicit(alpha.clone()))
            .unwrap_or(InitPolicy::Random { seed: a.seed });
        rows.push((k, solve(&instance, &config.clone().with_init(init))?));
    }
    let cell = |s: String| format!("{s:>14}");
    let mut line = |label: &str, f: &dyn Fn(&SolveReport) -> String| -> std::io::Result<()> {
        let cells: String = rows.iter().map(|(_, r)| cell(f(r))).collect();
        writeln!(out, "{label:<10}{cells}")
    };
    line("rank k", &|r| (r.final_angles.ncols() + 1).to_string())?;
    line("IT", &|r| r.iterations.to_string())?;
    line("CPU (s)", &|r| format!("{:.4}", r.wall_time.as_secs_f64()))?;
    line("GN", &|r| format!("{:.4e}", r.final_grad_norm()))?;
    line("ERR", &|r| format!("{:.4}", r.final_rel_residual()))?;
    line("status", &|r| r.termination.to_string())?;
    Ok(0)
}

fn cmd_validate(a: ValidateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&a.source)?;
    let instance = validate_problem(&loaded.targets, a.rank)?;
    writeln!(
        out,
        "ok n={} m={} k={}",
        instance.n(),
        instance.m(),
        instance.k()
    )?;
    Ok(0)
}
