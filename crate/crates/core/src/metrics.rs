//! Reporting quantities: relative residual and the mean target.

use ndarray::Array2;

use crate::model::{CorrelationMatrix, ProblemInstance};

/// `ε = Σ_d ‖A⁽ᵈ⁾ − Y‖_F² / Σ_d ‖A⁽ᵈ⁾‖_F²`.
pub fn relative_residual(instance: &ProblemInstance, y: &CorrelationMatrix) -> f64 {
    let y = y.as_array();
    assert_eq!(y.nrows(), instance.n(), "dimension mismatch");
    let num: f64 = instance
        .targets()
        .iter()
        .map(|a| (a - y).iter().map(|v| v * v).sum::<f64>())
        .sum();
    num / instance.total_sq_norm()
}

/// Converts objective values into relative residuals without rebuilding `Y`.
///
/// The objective counts each strict upper-triangular residual once, so
/// `Σ_d ‖A⁽ᵈ⁾ − Y‖² = 2F + Σ_d Σ_i (A⁽ᵈ⁾_ii − 1)²` for symmetric targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualScale {
    total_sq_norm: f64,
    diagonal_defect: f64,
}

impl ResidualScale {
    pub fn new(instance: &ProblemInstance) -> Self {
        Self {
            total_sq_norm: instance.total_sq_norm(),
            diagonal_defect: instance.diagonal_defect(),
        }
    }

    pub fn from_objective(&self, f: f64) -> f64 {
        (2.0 * f + self.diagonal_defect) / self.total_sq_norm
    }

    /// Objective value that corresponds to relative residual `eps`.
    pub fn to_objective(&self, eps: f64) -> f64 {
        (eps * self.total_sq_norm - self.diagonal_defect) / 2.0
    }
}

/// Single-target instance holding `Ā = (1/m) Σ_d A⁽ᵈ⁾`.
pub fn mean_target(instance: &ProblemInstance) -> ProblemInstance {
    let n = instance.n();
    let sum = instance
        .targets()
        .iter()
        .fold(Array2::<f64>::zeros((n, n)), |acc, a| acc + a);
    let mean = sum / instance.m() as f64;
    crate::model::validate_problem(&[mean], instance.k())
        .expect("the mean of correlation targets is a valid target")
}
