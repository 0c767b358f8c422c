//! Fletcher–Reeves conjugate gradient with a backtracking strong Wolfe
//! line search.
//!
//! The optimizer works on the column-wise vectorization `γ = α(:)` of the
//! angle matrix and reshapes back to `n × (k−1)` whenever the objective is
//! evaluated. The line search tries `β = ρ^m` for `m = 0, 1, …` and accepts
//! the first step satisfying
//!
//! ```text
//! F(γ + βd) ≤ F(γ) + δ β gᵀd
//! |∇F(γ + βd)ᵀd| ≤ −σ gᵀd
//! ```

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::ResidualScale;
use crate::model::{
    AngleMatrix, InitPolicy, IterateRecord, ProblemInstance, SolveReport, SolverConfig,
    Termination, TraceRecord, ValidationError,
};
use crate::objective;
use crate::param::angles_to_corr;

/// A smooth function of a flat parameter vector.
pub trait SmoothObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// `F` seen as a function of the column-wise vectorized angles.
#[derive(Debug, Clone, Copy)]
pub struct AngleObjective<'a> {
    instance: &'a ProblemInstance,
}

impl<'a> AngleObjective<'a> {
    pub fn new(instance: &'a ProblemInstance) -> Self {
        Self { instance }
    }

    fn reshape(&self, x: &[f64]) -> AngleMatrix {
        AngleMatrix::from_column_vec(x, self.instance.n(), self.instance.angle_cols())
            .expect("parameter vector has n(k-1) finite entries")
    }
}

impl SmoothObjective for AngleObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        objective::eval_objective(self.instance, &self.reshape(x))
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let ev = objective::evaluate(self.instance, &self.reshape(x));
        let g = AngleMatrix::new(ev.gradient)
            .expect("finite gradient")
            .to_column_vec();
        (ev.value, g)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirectionError {
    #[error("previous gradient is exactly zero while the current one is not")]
    DegenerateGradient,
}

/// Previous gradient and search direction, absent at `t = 0` or on restart.
#[derive(Debug, Clone, Copy)]
pub struct Previous<'a> {
    pub gradient: &'a [f64],
    pub direction: &'a [f64],
}

/// Fletcher–Reeves direction `d = −g + (gᵀg / g₋ᵀg₋) d₋`.
///
/// With `safeguard` set, a direction that is not a descent direction
/// (`dᵀg ≥ 0`) is replaced by `−g`.
pub fn direction(
    g: &[f64],
    previous: Option<Previous<'_>>,
    safeguard: bool,
) -> Result<Vec<f64>, DirectionError> {
    let steepest = || g.iter().map(|v| -v).collect::<Vec<_>>();
    let Some(prev) = previous else {
        return Ok(steepest());
    };
    let gg = dot(g, g);
    let prev_gg = dot(prev.gradient, prev.gradient);
    if prev_gg == 0.0 {
        if gg == 0.0 {
            return Ok(steepest());
        }
        return Err(DirectionError::DegenerateGradient);
    }
    let coeff = gg / prev_gg;
    let d: Vec<f64> = g
        .iter()
        .zip(prev.direction)
        .map(|(gi, di)| -gi + coeff * di)
        .collect();
    if safeguard && dot(&d, g) >= 0.0 {
        return Ok(steepest());
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub rho: f64,
    pub delta: f64,
    pub sigma: f64,
    pub max_backtrack: u32,
    /// Try `β = ρ^{-1}, ρ^{-2}, …` when no `β ≤ 1` is acceptable.
    pub expand: bool,
}

impl From<&SolverConfig> for LineSearchParams {
    fn from(c: &SolverConfig) -> Self {
        Self {
            rho: c.rho,
            delta: c.delta,
            sigma: c.sigma,
            max_backtrack: c.max_backtrack,
            expand: c.allow_expansion,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    /// Backtracking exponent; negative only for expanded steps.
    pub m_t: i32,
    /// Step length, `rho.powi(m_t)`.
    pub beta_t: f64,
    pub f_new: f64,
    pub accepted: bool,
    /// Trial point `γ + β d`.
    pub x_new: Vec<f64>,
    /// Gradient at the trial point; empty when the sufficient-decrease
    /// test already failed there.
    pub g_new: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineSearchError {
    #[error("search direction is not a descent direction (gᵀd = {slope:e})")]
    NotDescent { slope: f64 },
    #[error("no step rho^m with m <= {max_backtrack} satisfies the strong Wolfe conditions")]
    NoAcceptableStep {
        max_backtrack: u32,
        last: Box<LineSearchOutcome>,
    },
}

/// Whether a trial point satisfies both strong Wolfe conditions.
pub fn wolfe_conditions_hold(
    f_t: f64,
    slope: f64,
    f_new: f64,
    new_slope: f64,
    beta: f64,
    delta: f64,
    sigma: f64,
) -> (bool, bool) {
    let decrease = f_new <= f_t + delta * beta * slope;
    let curvature = new_slope.abs() <= -sigma * slope;
    (decrease, curvature)
}

/// Smallest `m ∈ {0, …, max_backtrack}` whose step `ρ^m` satisfies both
/// conditions.
///
/// If none does and `params.expand` is set, the exponents `−1, −2, …,
/// −max_backtrack` are tried in that order. This only matters when the
/// one-dimensional minimizer lies beyond the unit step, e.g. near a
/// degenerate minimum, where every `β ≤ 1` violates the curvature test.
pub fn strong_wolfe_backtrack<O: SmoothObjective + ?Sized>(
    objective: &O,
    x_t: &[f64],
    d_t: &[f64],
    g_t: &[f64],
    f_t: f64,
    params: &LineSearchParams,
) -> Result<LineSearchOutcome, LineSearchError> {
    let slope = dot(g_t, d_t);
    if slope.is_nan() || slope >= 0.0 {
        return Err(LineSearchError::NotDescent { slope });
    }
    let max = params.max_backtrack as i32;
    let expansion = (1..=max).map(|j| -j).filter(|_| params.expand);
    let mut last = None;
    for m in (0..=max).chain(expansion) {
        let beta = params.rho.powi(m);
        let x_new: Vec<f64> = x_t.iter().zip(d_t).map(|(x, d)| x + beta * d).collect();
        // Gradient only once sufficient decrease holds.
        let f_new = objective.value(&x_new);
        let mut outcome = LineSearchOutcome {
            m_t: m,
            beta_t: beta,
            f_new,
            accepted: false,
            x_new,
            g_new: Vec::new(),
        };
        if f_new <= f_t + params.delta * beta * slope {
            let (f_full, g_new) = objective.value_and_gradient(&outcome.x_new);
            outcome.f_new = f_full;
            let (decrease, curvature) = wolfe_conditions_hold(
                f_t,
                slope,
                f_full,
                dot(&g_new, d_t),
                beta,
                params.delta,
                params.sigma,
            );
            outcome.g_new = g_new;
            if decrease && curvature {
                outcome.accepted = true;
                return Ok(outcome);
            }
        }
        last = Some(outcome);
    }
    Err(LineSearchError::NoAcceptableStep {
        max_backtrack: params.max_backtrack,
        last: Box::new(last.expect("at least one trial")),
    })
}

/// Entries i.i.d. uniform on `[0, 1)`, drawn column by column.
pub fn random_angles(n: usize, cols: usize, seed: u64) -> AngleMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Array2::zeros((n, cols));
    for j in 0..cols {
        for i in 0..n {
            a[[i, j]] = rng.random::<f64>();
        }
    }
    AngleMatrix::new(a).expect("uniform draws are finite")
}

/// Runs the conjugate gradient iteration until `‖∇F‖_F < tol`, `max_iter`
/// iterations, or a failed line search.
pub fn solve(
    instance: &ProblemInstance,
    config: &SolverConfig,
) -> Result<SolveReport, ValidationError> {
    config.validate()?;
    let start = Instant::now();
    let (n, cols) = (instance.n(), instance.angle_cols());
    let (alpha0, seed) = match &config.init {
        InitPolicy::Random { seed } => (random_angles(n, cols, *seed), Some(*seed)),
        InitPolicy::Explicit(a) => {
            instance.check_angles(a)?;
            (a.clone(), None)
        }
    };
    let scale = ResidualScale::new(instance);
    let objective = AngleObjective::new(instance);
    let params = LineSearchParams::from(config);

    let mut x = alpha0.to_column_vec();
    let (mut f, mut g) = objective.value_and_gradient(&x);
    let mut trace = vec![TraceRecord {
        t: 0,
        f,
        grad_norm: norm(&g),
        rel_residual: scale.from_objective(f),
        step: None,
        backtracks: None,
    }];
    let mut iterates = Vec::new();
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut t = 0;

    let termination = if cols == 0 {
        // k = 1: Y = eeᵀ is the only reachable matrix.
        Termination::Converged
    } else {
        loop {
            if norm(&g) < config.tol {
                break Termination::Converged;
            }
            if t >= config.max_iter {
                break Termination::MaxIter;
            }
            let restart = config.restart_period.is_some_and(|p| t % p == 0);
            let prev = previous
                .as_ref()
                .filter(|_| !restart)
                .map(|(pg, pd)| Previous {
                    gradient: pg,
                    direction: pd,
                });
            let Ok(d) = direction(&g, prev, config.descent_safeguard) else {
                break Termination::LineSearchFailed;
            };
            if config.record_iterates {
                iterates.push(IterateRecord {
                    alpha: AngleMatrix::from_column_vec(&x, n, cols)?,
                    direction: d.clone(),
                });
            }
            let Ok(ls) = strong_wolfe_backtrack(&objective, &x, &d, &g, f, &params) else {
                break Termination::LineSearchFailed;
            };
            x = ls.x_new;
            f = ls.f_new;
            previous = Some((std::mem::replace(&mut g, ls.g_new), d));
            t += 1;
            trace.push(TraceRecord {
                t,
                f,
                grad_norm: norm(&g),
                rel_residual: scale.from_objective(f),
                step: Some(ls.beta_t),
                backtracks: Some(ls.m_t),
            });
        }
    };

    let final_angles = AngleMatrix::from_column_vec(&x, n, cols)?;
    let final_corr = angles_to_corr(&final_angles);
    Ok(SolveReport {
        final_angles,
        final_corr,
        trace,
        termination,
        iterations: t,
        wall_time: start.elapsed(),
        seed,
        iterates,
    })
}

/// Runs from several starting points and keeps the lowest objective.
#[derive(Debug, Clone)]
pub struct MultiStartReport {
    /// One report per start, in start order.
    pub runs: Vec<SolveReport>,
    /// Index of the run with the smallest final `F` (lowest index on ties).
    pub best: usize,
}

impl MultiStartReport {
    pub fn best_run(&self) -> &SolveReport {
        &self.runs[self.best]
    }
}

/// Solves once per seed, in parallel, with `InitPolicy::Random`.
pub fn multistart(
    instance: &ProblemInstance,
    config: &SolverConfig,
    seeds: &[u64],
) -> Result<MultiStartReport, ValidationError> {
    if seeds.is_empty() {
        return Err(ValidationError::InvalidConfig(
            "multistart needs at least one start".into(),
        ));
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| solve(instance, &config.clone().with_init(InitPolicy::Random { seed })))
        .collect::<Result<Vec<_>, _>>()?;
    let best = pick_best(&runs);
    Ok(MultiStartReport { runs, best })
}

fn pick_best(runs: &[SolveReport]) -> usize {
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        if r.final_objective() < runs[best].final_objective() {
            best = i;
        }
    }
    best
}
