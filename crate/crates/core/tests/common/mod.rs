#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankcorr::model::{validate_problem, AngleMatrix, ProblemInstance};
use rankcorr::param::angles_to_corr;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_angles(rng: &mut ChaCha8Rng, n: usize, cols: usize) -> AngleMatrix {
    AngleMatrix::new(Array2::from_shape_fn((n, cols), |_| {
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
    }))
    .unwrap()
}

/// Full-rank random correlation matrix.
pub fn random_corr(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let alpha = random_angles(rng, n, n - 1);
    let mut y = angles_to_corr(&alpha).into_array();
    // Clean up rounding so the diagonal is exact and the matrix symmetric.
    for i in 0..n {
        y[[i, i]] = 1.0;
    }
    y
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> ProblemInstance {
    let targets: Vec<_> = (0..m).map(|_| random_corr(rng, n)).collect();
    validate_problem(&targets, k).unwrap()
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
