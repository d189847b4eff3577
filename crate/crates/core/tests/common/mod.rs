#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
}

pub fn vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

/// `n × d` with orthonormal columns (`n ≥ d`).
pub fn orthonormal(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    gaussian(n, d, seed).qr().q()
}

/// `U diag(s) Vᵀ` with random orthonormal `U` (`n × d`) and `V` (`d × d`).
pub fn with_singular_values(n: usize, s: &[f64], seed: u64) -> DMatrix<f64> {
    let d = s.len();
    let u = orthonormal(n, d, seed);
    let v = orthonormal(d, d, seed.wrapping_add(1));
    u * DMatrix::from_diagonal(&DVector::from_column_slice(s)) * v.transpose()
}

/// Dense `(M + γI)⁻¹` by explicit inversion.
pub fn dense_inverse(m: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let mut h = m.clone();
    for i in 0..h.nrows() {
        h[(i, i)] += gamma;
    }
    h.try_inverse().expect("shifted matrix is invertible")
}

pub fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Largest `|λ|` of a symmetric matrix, from the full eigenvalue list.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Squared singular values, decreasing.
pub fn squared_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().map(|x| x * x).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `Σ_{i ≥ k} σᵢ²`.
pub fn tail(a: &DMatrix<f64>, k: usize) -> f64 {
    squared_singular_values(a).iter().skip(k).sum()
}
