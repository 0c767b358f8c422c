//! Spherical parametrization of rank-`k` correlation matrices.
//!
//! Row `i` of the factor `X` is the point on the unit `(k−1)`-sphere with
//! hyperspherical angles `α_i0 … α_i(k−2)`:
//!
//! ```text
//! X[i][j]   = cos α_ij · Π_{l<j} sin α_il      (j < k−1)
//! X[i][k−1] = Π_{l<k−1} sin α_il
//! ```
//!
//! so every row has unit norm and `Y = XXᵀ` has unit diagonal and rank at
//! most `k`. For `k = 1` there are no angles and `X` is the all-ones column.

use ndarray::Array2;

use crate::model::{AngleMatrix, CorrelationMatrix, FactorMatrix};

pub fn angles_to_factor(alpha: &AngleMatrix) -> FactorMatrix {
    let (n, cols) = alpha.dim();
    let a = alpha.as_array();
    let mut x = Array2::zeros((n, cols + 1));
    for i in 0..n {
        let mut sin_prod = 1.0;
        for j in 0..cols {
            let (s, c) = a[[i, j]].sin_cos();
            x[[i, j]] = c * sin_prod;
            sin_prod *= s;
        }
        x[[i, cols]] = sin_prod;
    }
    FactorMatrix(x)
}

/// `Y = XXᵀ` filled from the upper triangle, diagonal set to exactly 1.
pub fn factor_to_corr(x: &FactorMatrix) -> CorrelationMatrix {
    let x = x.as_array();
    let n = x.nrows();
    let mut y = Array2::zeros((n, n));
    for i in 0..n {
        y[[i, i]] = 1.0;
        for j in i + 1..n {
            let v = x.row(i).dot(&x.row(j));
            y[[i, j]] = v;
            y[[j, i]] = v;
        }
    }
    CorrelationMatrix(y)
}

/// Convenience composition of [`angles_to_factor`] and [`factor_to_corr`].
pub fn angles_to_corr(alpha: &AngleMatrix) -> CorrelationMatrix {
    factor_to_corr(&angles_to_factor(alpha))
}

/// Closed-form entry `y_ij` evaluated directly from the angles.
pub fn corr_entry(alpha: &AngleMatrix, i: usize, j: usize) -> f64 {
    let n = alpha.nrows();
    assert!(i < n && j < n, "index ({i}, {j}) out of range for n = {n}");
    if i == j {
        return 1.0;
    }
    let a = alpha.as_array();
    let mut sum = 0.0;
    let mut prod = 1.0;
    for p in 0..alpha.ncols() {
        let (si, ci) = a[[i, p]].sin_cos();
        let (sj, cj) = a[[j, p]].sin_cos();
        sum += ci * cj * prod;
        prod *= si * sj;
    }
    sum + prod
}

/// Cached sines and cosines of every angle.
#[derive(Debug, Clone)]
pub struct TrigTable {
    pub(crate) sin: Array2<f64>,
    pub(crate) cos: Array2<f64>,
}

impl TrigTable {
    pub fn new(alpha: &AngleMatrix) -> Self {
        let a = alpha.as_array();
        Self {
            sin: a.mapv(f64::sin),
            cos: a.mapv(f64::cos),
        }
    }

    /// Same value as [`corr_entry`], without recomputing trig functions.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        let mut sum = 0.0;
        let mut prod = 1.0;
        for p in 0..self.sin.ncols() {
            sum += self.cos[[i, p]] * self.cos[[j, p]] * prod;
            prod *= self.sin[[i, p]] * self.sin[[j, p]];
        }
        sum + prod
    }

    /// Full `Y` assembled entry by entry from the closed form.
    pub fn corr_matrix(&self) -> CorrelationMatrix {
        let n = self.sin.nrows();
        let mut y = Array2::zeros((n, n));
        for i in 0..n {
            y[[i, i]] = 1.0;
            for j in i + 1..n {
                let v = self.entry(i, j);
                y[[i, j]] = v;
                y[[j, i]] = v;
            }
        }
        CorrelationMatrix(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_angles(rng: &mut ChaCha8Rng, n: usize, cols: usize) -> AngleMatrix {
        AngleMatrix::new(Array2::from_shape_fn((n, cols), |_| {
            rng.random_range(-PI..PI)
        }))
        .unwrap()
    }

    #[test]
    fn three_by_two_factor() {
        let a = [0.3, -1.1, 2.0];
        let alpha = AngleMatrix::new(array![[a[0]], [a[1]], [a[2]]]).unwrap();
        let x = angles_to_factor(&alpha);
        for (i, ai) in a.iter().enumerate() {
            assert_eq!(x.as_array()[[i, 0]], ai.cos());
            assert_eq!(x.as_array()[[i, 1]], ai.sin());
        }
        let y = factor_to_corr(&x);
        let expected = a[0].cos() * a[1].cos() + a[0].sin() * a[1].sin();
        assert!((y.as_array()[[0, 1]] - expected).abs() < 1e-15);
        assert!(y.as_array().diag().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn zero_angles_give_all_ones() {
        let alpha = AngleMatrix::zeros(4, 2);
        let x = angles_to_factor(&alpha);
        assert_eq!(
            x.as_array(),
            &array![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
        );
        let y = factor_to_corr(&x);
        assert!(y.as_array().iter().all(|&v| v == 1.0));
        assert_eq!(corr_entry(&alpha, 0, 3), 1.0);
    }

    #[test]
    fn right_angles_select_last_column() {
        let alpha = AngleMatrix::new(array![[FRAC_PI_2, FRAC_PI_2]]).unwrap();
        let x = angles_to_factor(&alpha);
        let row = x.as_array().row(0).to_vec();
        assert!(row[0].abs() < 1e-16 && row[1].abs() < 1e-16);
        assert_eq!(row[2], 1.0);
    }

    #[test]
    fn rank_one_is_all_ones() {
        let alpha = AngleMatrix::zeros(3, 0);
        let x = angles_to_factor(&alpha);
        assert_eq!(x.as_array(), &Array2::<f64>::ones((3, 1)));
        assert_eq!(corr_entry(&alpha, 0, 2), 1.0);
    }

    #[test]
    fn orthonormal_rows_give_identity() {
        let x = FactorMatrix::from_rows(array![[1.0, 0.0], [0.0, 1.0]], 1e-12).unwrap();
        assert_eq!(factor_to_corr(&x).as_array(), &Array2::<f64>::eye(2));
    }

    #[test]
    fn closed_form_matches_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alpha = random_angles(&mut rng, 5, 2);
        let x = angles_to_factor(&alpha);
        let xa = x.as_array();
        let table = TrigTable::new(&alpha);
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = (0..3).map(|c| xa[[i, c]] * xa[[j, c]]).sum();
                let expected = if i == j { 1.0 } else { dot };
                assert!((corr_entry(&alpha, i, j) - expected).abs() < 1e-13);
                assert!((table.entry(i, j) - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn diagonal_is_one_for_any_angles() {
        let alpha = AngleMatrix::new(array![[1e3, -7.0, 0.1], [2.5, 3.3, -9.9]]).unwrap();
        assert_eq!(corr_entry(&alpha, 1, 1), 1.0);
        let y = angles_to_corr(&alpha);
        assert!(y.as_array().diag().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn periodic_in_each_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alpha = random_angles(&mut rng, 4, 3);
        for i in 0..4 {
            for c in 0..3 {
                let mut shifted = alpha.as_array().clone();
                shifted[[i, c]] += 2.0 * PI;
                let shifted = AngleMatrix::new(shifted).unwrap();
                for j in 0..4 {
                    let d = corr_entry(&alpha, i, j) - corr_entry(&shifted, i, j);
                    assert!(d.abs() < 1e-12);
                }
            }
        }
    }
}
