mod common;

use common::orthonormal;
use fdridge::random_sketch::{GaussianSketchSpec, RandomKind, RandomSketch, SjltSketchSpec};
use nalgebra::DMatrix;

fn unit_vector(n: usize) -> DMatrix<f64> {
    let x = DMatrix::from_fn(n, 1, |i, _| ((i * 37 % 11) as f64 - 5.0) + 0.5);
    let norm = x.norm();
    x / norm
}

fn mean_isometry(kind: RandomKind, m: usize, s: usize) -> f64 {
    let n = 700;
    let x = unit_vector(n);
    let total: f64 = (0..200u64)
        .map(|seed| {
            let sk = RandomSketch::new(kind, m, n, s, seed).unwrap();
            sk.apply(&x).unwrap().norm_squared()
        })
        .sum();
    total / 200.0
}

#[test]
fn gaussian_isometry_in_expectation() {
    let mean = mean_isometry(RandomKind::Gaussian, 512, 1);
    assert!((0.9..=1.1).contains(&mean), "{mean}");
}

#[test]
fn sjlt_isometry_in_expectation() {
    let mean = mean_isometry(RandomKind::Sjlt, 512, 8);
    assert!((0.9..=1.1).contains(&mean), "{mean}");
}

#[test]
fn gaussian_entries_scaled() {
    let s = GaussianSketchSpec::new(400, 300, 2).unwrap().realize();
    let var = s.iter().map(|v| v * v).sum::<f64>() / (400.0 * 300.0);
    assert!((var * 400.0 - 1.0).abs() < 0.02, "{var}");
}

#[test]
fn sjlt_basis_columns() {
    let (m, n, s) = (40, 25, 5);
    let spec = SjltSketchSpec::new(m, n, s, 9).unwrap();
    for j in 0..n {
        let mut e = DMatrix::zeros(n, 1);
        e[(j, 0)] = 1.0;
        let col = spec.apply(&e).unwrap();
        let nz: Vec<f64> = col.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), s);
        assert!(nz.iter().all(|v| (v.abs() - 1.0 / (s as f64).sqrt()).abs() < 1e-15));
    }
}

fn embedding_success(kind: RandomKind, s: usize) -> usize {
    let (n, d, m, rho) = (2048, 16, 1024, 0.5);
    let u = orthonormal(n, d, 77);
    (0..100u64)
        .filter(|&seed| {
            let su = RandomSketch::new(kind, m, n, s, 1000 + seed).unwrap().apply(&u).unwrap();
            su.singular_values().iter().all(|&sv| sv >= 1.0 - rho && sv <= 1.0 + rho)
        })
        .count()
}

#[test]
fn gaussian_subspace_embedding() {
    let ok = embedding_success(RandomKind::Gaussian, 1);
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn sjlt_subspace_embedding() {
    let ok = embedding_success(RandomKind::Sjlt, 8);
    assert!(ok >= 95, "{ok}/100");
}
