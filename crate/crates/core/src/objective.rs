//! The unconstrained objective
//!
//! ```text
//! F(α) = Σ_d Σ_{i<j} (y_ij(α) − A⁽ᵈ⁾_ij)²
//! ```
//!
//! and its gradient with respect to the angles.
//!
//! Two gradient routes are provided. [`eval_gradient`] goes through the
//! chain rule `∂F/∂α_μν = Σ_c (2RX)_μc ∂X_μc/∂α_μν` with the residual
//! `R = Σ_d (Y − A⁽ᵈ⁾)` (zero diagonal) formed once, which costs
//! `O(m·n² + n²·k)`. [`eval_gradient_reference`] evaluates the expanded
//! three-term entry derivative literally in `O(m·n²·k²)` and exists to
//! check the fast route.

use ndarray::Array2;

use crate::model::{AngleMatrix, ProblemInstance};
use crate::param::TrigTable;

/// Objective value and gradient at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Array2<f64>,
}

fn assert_shape(instance: &ProblemInstance, alpha: &AngleMatrix) {
    if let Err(e) = instance.check_angles(alpha) {
        panic!("{e}");
    }
}

fn objective_from_table(instance: &ProblemInstance, table: &TrigTable) -> f64 {
    let n = instance.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let y = table.entry(i, j);
            for a in instance.targets() {
                let r = y - a[[i, j]];
                total += r * r;
            }
        }
    }
    total
}

pub fn eval_objective(instance: &ProblemInstance, alpha: &AngleMatrix) -> f64 {
    assert_shape(instance, alpha);
    objective_from_table(instance, &TrigTable::new(alpha))
}

pub fn eval_gradient(instance: &ProblemInstance, alpha: &AngleMatrix) -> Array2<f64> {
    evaluate(instance, alpha).gradient
}

/// Value and gradient sharing one pass over the closed-form entries.
pub fn evaluate(instance: &ProblemInstance, alpha: &AngleMatrix) -> ObjectiveEval {
    assert_shape(instance, alpha);
    let n = instance.n();
    let cols = alpha.ncols();
    let table = TrigTable::new(alpha);
    let m = instance.m() as f64;

    // R = Σ_d (Y − A⁽ᵈ⁾), off-diagonal only.
    let mut resid = Array2::<f64>::zeros((n, n));
    let mut value = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let y = table.entry(i, j);
            let mut sum_a = 0.0;
            for a in instance.targets() {
                let r = y - a[[i, j]];
                value += r * r;
                sum_a += a[[i, j]];
            }
            let r = m * y - sum_a;
            resid[[i, j]] = r;
            resid[[j, i]] = r;
        }
    }
    if cols == 0 {
        return ObjectiveEval {
            value,
            gradient: Array2::zeros((n, 0)),
        };
    }

    let x = crate::param::angles_to_factor(alpha);
    let h = resid.dot(x.as_array()) * 2.0;
    let mut gradient = Array2::zeros((n, cols));
    let mut suffix = vec![0.0; cols];
    for mu in 0..n {
        let s = table.sin.row(mu);
        let c = table.cos.row(mu);
        let hr = h.row(mu);
        // suffix[ν] = Σ_{c>ν} H_c ∂X_c/∂α_ν / (cos α_ν Π_{l<ν} sin α_l)
        suffix[cols - 1] = hr[cols];
        for nu in (0..cols - 1).rev() {
            suffix[nu] = hr[nu + 1] * c[nu + 1] + s[nu + 1] * suffix[nu + 1];
        }
        let mut prefix = 1.0;
        for nu in 0..cols {
            gradient[[mu, nu]] = prefix * (c[nu] * suffix[nu] - s[nu] * hr[nu]);
            prefix *= s[nu];
        }
    }
    ObjectiveEval { value, gradient }
}

/// Gradient from the expanded entry derivative
///
/// ```text
/// ∂y_μi/∂α_μν = −sin α_μν cos α_iν Π_{l<ν} sin α_μl sin α_il
///             + cos α_μν sin α_iν Π_{l≠ν} sin α_μl sin α_il
///             + cos α_μν sin α_iν Σ_{p>ν} cos α_μp cos α_ip Π_{l<p, l≠ν} sin α_μl sin α_il
/// ```
///
/// summed against `2(y_μi − A⁽ᵈ⁾_μi)` over `d` and `i ≠ μ`.
pub fn eval_gradient_reference(instance: &ProblemInstance, alpha: &AngleMatrix) -> Array2<f64> {
    assert_shape(instance, alpha);
    let n = instance.n();
    let cols = alpha.ncols();
    let t = TrigTable::new(alpha);
    let (sin, cos) = (&t.sin, &t.cos);
    let ss = |mu: usize, i: usize, l: usize| sin[[mu, l]] * sin[[i, l]];

    let mut grad = Array2::zeros((n, cols));
    for mu in 0..n {
        for nu in 0..cols {
            let mut acc = 0.0;
            for i in (0..n).filter(|&i| i != mu) {
                let lead: f64 = (0..nu).map(|l| ss(mu, i, l)).product();
                let first = -sin[[mu, nu]] * cos[[i, nu]] * lead;
                let tail: f64 = (0..cols).filter(|&l| l != nu).map(|l| ss(mu, i, l)).product();
                let second = cos[[mu, nu]] * sin[[i, nu]] * tail;
                let mut third = 0.0;
                for p in nu + 1..cols {
                    let pr: f64 = (0..p).filter(|&l| l != nu).map(|l| ss(mu, i, l)).product();
                    third += cos[[mu, p]] * cos[[i, p]] * pr;
                }
                third *= cos[[mu, nu]] * sin[[i, nu]];
                let dy = first + second + third;
                let y = t.entry(mu, i);
                for a in instance.targets() {
                    acc += (y - a[[mu, i]]) * dy;
                }
            }
            grad[[mu, nu]] = 2.0 * acc;
        }
    }
    grad
}

/// Central differences `(F(α + hE) − F(α − hE)) / 2h`, one component at a time.
pub fn finite_difference_gradient(
    instance: &ProblemInstance,
    alpha: &AngleMatrix,
    h: f64,
) -> Array2<f64> {
    assert!(h > 0.0, "finite difference step must be positive");
    assert_shape(instance, alpha);
    let base = alpha.as_array();
    let mut grad = Array2::zeros(base.dim());
    let mut work = base.clone();
    for ((i, j), g) in grad.indexed_iter_mut() {
        let orig = base[[i, j]];
        work[[i, j]] = orig + h;
        let plus = eval_objective(instance, &AngleMatrix::new(work.clone()).unwrap());
        work[[i, j]] = orig - h;
        let minus = eval_objective(instance, &AngleMatrix::new(work.clone()).unwrap());
        work[[i, j]] = orig;
        *g = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Largest componentwise discrepancy between two gradients, scaled by the
/// largest component of `reference` (floored at `1e-10`).
pub fn gradient_rel_error(analytic: &Array2<f64>, reference: &Array2<f64>) -> f64 {
    let scale = reference
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1e-10);
    analytic
        .iter()
        .zip(reference.iter())
        .fold(0.0_f64, |acc, (a, r)| acc.max((a - r).abs()))
        / scale
}
