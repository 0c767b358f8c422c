//! Domain types shared by the parametrization, objective and solver.
//!
//! Targets are validated once on the way in ([`validate_problem`]) and are
//! immutable afterwards, so a [`ProblemInstance`] can be shared freely
//! between threads (for example by concurrent multistart runs).

use std::time::Duration;

use ndarray::Array2;
use thiserror::Error;

/// Relative Frobenius tolerance for `‖A − Aᵀ‖ / ‖A‖`.
pub const SYM_TOL: f64 = 1e-8;
/// Absolute tolerance on `|A_ii − 1|`.
pub const DIAG_TOL: f64 = 1e-8;
/// Slack allowed outside `[-1, 1]` for off-diagonal entries.
pub const ENTRY_TOL: f64 = 1e-8;
/// Relative eigenvalue threshold used when counting the numerical rank.
pub const RANK_EIG_TOL: f64 = 1e-8;

/// Threshold above which an eigenvalue counts towards the numerical rank,
/// given the largest eigenvalue of the matrix.
pub fn rank_threshold(largest_eigenvalue: f64) -> f64 {
    RANK_EIG_TOL * largest_eigenvalue.max(1.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("no target matrices given")]
    Empty,
    #[error("matrix {index} is {rows}x{cols}, expected a square matrix")]
    NotSquare {
        index: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("matrix {index} is not a correlation matrix: {reason}")]
    NotCorrelation { index: usize, reason: String },
    #[error("rank bound k = {k} out of range, need 1 <= k < n = {n}")]
    RankOutOfRange { k: usize, n: usize },
    #[error("angle matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    AngleShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("angle matrix contains a non-finite entry")]
    NonFiniteAngle,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// The target matrices `A⁽¹⁾ … A⁽ᵐ⁾` together with the rank bound `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    targets: Vec<Array2<f64>>,
    n: usize,
    k: usize,
}

impl ProblemInstance {
    pub fn targets(&self) -> &[Array2<f64>] {
        &self.targets
    }

    /// Matrix dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Rank bound.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of target matrices.
    pub fn m(&self) -> usize {
        self.targets.len()
    }

    /// Number of angle columns, `k − 1`.
    pub fn angle_cols(&self) -> usize {
        self.k - 1
    }

    /// Same targets with a different rank bound.
    pub fn with_rank(&self, k: usize) -> Result<Self, ValidationError> {
        check_rank(k, self.n)?;
        Ok(Self {
            targets: self.targets.clone(),
            n: self.n,
            k,
        })
    }

    /// `Σ_d ‖A⁽ᵈ⁾‖_F²`.
    pub fn total_sq_norm(&self) -> f64 {
        self.targets
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `Σ_d Σ_i (A⁽ᵈ⁾_ii − 1)²`; zero whenever the diagonals are exact.
    pub fn diagonal_defect(&self) -> f64 {
        self.targets
            .iter()
            .map(|a| a.diag().iter().map(|v| (v - 1.0).powi(2)).sum::<f64>())
            .sum()
    }

    /// Angle shape check for this instance.
    pub fn check_angles(&self, alpha: &AngleMatrix) -> Result<(), ValidationError> {
        let (rows, cols) = alpha.dim();
        if rows != self.n || cols != self.angle_cols() {
            return Err(ValidationError::AngleShape {
                rows,
                cols,
                expected_rows: self.n,
                expected_cols: self.angle_cols(),
            });
        }
        Ok(())
    }
}

fn check_rank(k: usize, n: usize) -> Result<(), ValidationError> {
    if k < 1 || k >= n {
        Err(ValidationError::RankOutOfRange { k, n })
    } else {
        Ok(())
    }
}

/// Validates raw target matrices and builds a [`ProblemInstance`].
///
/// Each input is symmetrized as `(A + Aᵀ)/2` and the symmetrized copy is
/// stored. Positive semidefiniteness of the inputs is not required.
pub fn validate_problem(
    raw: &[Array2<f64>],
    k: usize,
) -> Result<ProblemInstance, ValidationError> {
    let first = raw.first().ok_or(ValidationError::Empty)?;
    let n = first.nrows();
    let mut targets = Vec::with_capacity(raw.len());
    for (index, a) in raw.iter().enumerate() {
        let (rows, cols) = a.dim();
        if rows != cols {
            return Err(ValidationError::NotSquare { index, rows, cols });
        }
        if rows != n {
            return Err(ValidationError::DimensionMismatch {
                index,
                expected: n,
                found: rows,
            });
        }
        targets.push(check_correlation(index, a)?);
    }
    check_rank(k, n)?;
    Ok(ProblemInstance { targets, n, k })
}

fn check_correlation(index: usize, a: &Array2<f64>) -> Result<Array2<f64>, ValidationError> {
    let fail = |reason: String| ValidationError::NotCorrelation { index, reason };
    if a.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite entry".into()));
    }
    let asym = (a - &a.t()).iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if asym > SYM_TOL * norm {
        return Err(fail(format!(
            "relative asymmetry {:.3e} exceeds {SYM_TOL:e}",
            asym / norm
        )));
    }
    let sym = (a + &a.t()) * 0.5;
    for (i, d) in sym.diag().iter().enumerate() {
        if (d - 1.0).abs() > DIAG_TOL {
            return Err(fail(format!("diagonal entry ({i},{i}) = {d}")));
        }
    }
    for ((i, j), v) in sym.indexed_iter() {
        if v.abs() > 1.0 + ENTRY_TOL {
            return Err(fail(format!("entry ({i},{j}) = {v} outside [-1, 1]")));
        }
    }
    Ok(sym)
}

/// The `n × (k−1)` matrix of angles, the optimization variable.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix(Array2<f64>);

impl AngleMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self, ValidationError> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::NonFiniteAngle);
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize, cols: usize) -> Self {
        Self(Array2::zeros((n, cols)))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    /// Number of angle columns, `k − 1`.
    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    /// Column-wise vectorization, `α(:)`.
    pub fn to_column_vec(&self) -> Vec<f64> {
        let (n, c) = self.0.dim();
        let mut out = Vec::with_capacity(n * c);
        for j in 0..c {
            out.extend(self.0.column(j).iter());
        }
        out
    }

    /// Inverse of [`AngleMatrix::to_column_vec`], `reshape(γ, n, k−1)`.
    pub fn from_column_vec(gamma: &[f64], n: usize, cols: usize) -> Result<Self, ValidationError> {
        if gamma.len() != n * cols {
            return Err(ValidationError::AngleShape {
                rows: gamma.len(),
                cols: 1,
                expected_rows: n * cols,
                expected_cols: 1,
            });
        }
        Self::new(Array2::from_shape_fn((n, cols), |(i, j)| gamma[j * n + i]))
    }
}

/// The `n × k` factor `X` with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix(pub(crate) Array2<f64>);

impl FactorMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    /// Wraps an arbitrary factor after checking the unit row norm condition.
    pub fn from_rows(entries: Array2<f64>, tol: f64) -> Option<Self> {
        let ok = entries
            .rows()
            .into_iter()
            .all(|r| (r.dot(&r) - 1.0).abs() <= tol);
        ok.then_some(Self(entries))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }
}

/// A symmetric unit-diagonal matrix `Y = XXᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(pub(crate) Array2<f64>);

impl CorrelationMatrix {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

/// How the starting angles are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    /// Entries i.i.d. uniform on `[0, 1)` from a seeded generator.
    Random { seed: u64 },
    Explicit(AngleMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Backtracking ratio, step lengths are `rho^m`.
    pub rho: f64,
    /// Sufficient-decrease constant.
    pub delta: f64,
    /// Curvature constant.
    pub sigma: f64,
    /// Stop once `‖∇F‖_F < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest backtracking exponent tried per line search.
    pub max_backtrack: u32,
    pub init: InitPolicy,
    /// Reset to steepest descent every `restart_period` iterations.
    pub restart_period: Option<usize>,
    /// Fall back to `−g` whenever the conjugate direction is not a descent
    /// direction. Disable for a literal run of the unsafeguarded iteration.
    pub descent_safeguard: bool,
    /// Allow steps longer than 1 when no backtracked step is acceptable.
    pub allow_expansion: bool,
    /// Keep every iterate and search direction in the report.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 0.8,
            delta: 0.1,
            sigma: 0.4,
            tol: 1e-4,
            max_iter: 2000,
            max_backtrack: 60,
            init: InitPolicy::Random { seed: 0 },
            restart_period: None,
            descent_safeguard: true,
            allow_expansion: true,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn with_init(mut self, init: InitPolicy) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let bad = |s: &str| Err(ValidationError::InvalidConfig(s.to_string()));
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.delta > 0.0 && self.delta < self.sigma && self.sigma < 0.5) {
            return bad("need 0 < delta < sigma < 0.5");
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad("tol must be nonnegative");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if self.restart_period == Some(0) {
            return bad("restart_period must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    LineSearchFailed,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::LineSearchFailed => "line_search_failed",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State after iteration `t`. `step` and `backtracks` describe the accepted
/// line search that produced `α_t`; both are `None` for `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub rel_residual: f64,
    pub step: Option<f64>,
    pub backtracks: Option<i32>,
}

/// Iterate `α_t` and the direction `d_t` searched from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub alpha: AngleMatrix,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_angles: AngleMatrix,
    pub final_corr: CorrelationMatrix,
    /// `iterations + 1` records, starting at `t = 0`.
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    pub iterations: usize,
    pub wall_time: Duration,
    /// Seed used for random initialization, if any.
    pub seed: Option<u64>,
    /// Filled only when `record_iterates` is set; entry `t` holds `α_t`
    /// and the direction tried from it.
    pub iterates: Vec<IterateRecord>,
}

impl SolveReport {
    pub fn last(&self) -> &TraceRecord {
        self.trace.last().expect("trace always holds t = 0")
    }

    pub fn final_objective(&self) -> f64 {
        self.last().f
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.last().grad_norm
    }

    pub fn final_rel_residual(&self) -> f64 {
        self.last().rel_residual
    }
}
