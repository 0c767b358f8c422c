//! Nearest low-rank correlation matrix to a set of sampled correlation
//! matrices.
//!
//! Given targets `A⁽¹⁾ … A⁽ᵐ⁾` and a rank bound `k`, the solver minimizes
//! `½ Σ_d ‖A⁽ᵈ⁾ − Y‖_F²` over correlation matrices `Y` of rank at most `k`.
//! The feasible set is parametrized by an `n × (k−1)` matrix of angles
//! (each row of the factor `X` is a point on the unit sphere, `Y = XXᵀ`),
//! which turns the problem into an unconstrained smooth one that is solved
//! with Fletcher–Reeves conjugate gradient and a backtracking strong Wolfe
//! line search.
//!
//! ```
//! use rankcorr::{io, optimizer, model::{InitPolicy, SolverConfig}};
//!
//! let fixture = io::load_fixture("example31").unwrap();
//! let instance = fixture.instance(3).unwrap();
//! let init = fixture.init_for(3).unwrap().clone();
//! let report = optimizer::solve(&instance, &SolverConfig::default().with_init(InitPolicy::Explicit(init))).unwrap();
//! assert!(report.final_grad_norm() < 1e-4);
//! ```

pub mod cli;
pub mod io;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod param;

pub use model::{
    validate_problem, AngleMatrix, CorrelationMatrix, FactorMatrix, InitPolicy, ProblemInstance,
    SolveReport, SolverConfig, Termination, ValidationError,
};
pub use optimizer::{multistart, solve};
