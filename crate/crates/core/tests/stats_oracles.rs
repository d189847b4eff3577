mod common;

use common::{dense_inverse, gaussian, tail, vector};
use fdridge::random_sketch::{RandomKind, RandomSketch};
use fdridge::sketch::{SketchMode, StreamingSketch};
use fdridge::stats::{
    optimal_diagnostics, sketched_diagnostics, theta_interval, DataSpectrum, DiagnosticsReport,
    LinearModelSpec, RandomizedSpectrum,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Bias² and variance trace of the linear estimator `x̂ = W y`.
fn dense_report(w: &DMatrix<f64>, a: &DMatrix<f64>, model: &LinearModelSpec) -> DiagnosticsReport {
    let bias = w * (a * &model.x0) - &model.x0;
    DiagnosticsReport::new(bias.norm_squared(), model.sigma * model.sigma * w.norm_squared())
}

fn close(a: &DiagnosticsReport, b: &DiagnosticsReport, tol: f64) -> bool {
    a.as_array().iter().zip(b.as_array()).all(|(x, y)| (x - y).abs() <= tol * y.abs())
}

#[test]
fn optimal_bias_matches_monte_carlo() {
    let (n, d) = (40, 6);
    let a = gaussian(n, d, 1);
    let x0 = vector(d, 2);
    let sigma = 1.5;
    let gamma = 4.0;
    let model = LinearModelSpec::new(x0.clone(), sigma).unwrap();
    let w = dense_inverse(&a.tr_mul(&a), gamma) * a.transpose();
    let mean_y = &a * &x0;

    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sum = DVector::zeros(d);
    let mut sum_sq = DVector::zeros(d);
    let mut eps = DVector::zeros(n);
    for _ in 0..draws {
        for e in eps.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *e = sigma * z;
        }
        let x = &w * (&mean_y + &eps) - &x0;
        sum += &x;
        sum_sq += x.component_mul(&x);
    }
    let mean = &sum / draws as f64;
    let var = &sum_sq / draws as f64 - mean.component_mul(&mean);

    let analytic = -(dense_inverse(&a.tr_mul(&a), gamma) * &x0) * gamma;
    for i in 0..d {
        let se = (var[i] / draws as f64).sqrt();
        assert!((mean[i] - analytic[i]).abs() <= 3.0 * se, "coord {i}: {} vs {}", mean[i], analytic[i]);
    }
    let report = optimal_diagnostics(&a, &model, gamma).unwrap();
    assert!((report.bias_sq - analytic.norm_squared()).abs() < 1e-12 * report.bias_sq);
    assert!((var.sum() - report.var_trace).abs() < 0.02 * report.var_trace);
}

#[test]
fn optimal_matches_dense_weights() {
    let a = gaussian(25, 5, 4);
    let model = LinearModelSpec::new(vector(5, 5), 0.8).unwrap();
    for &g in &[0.01, 1.0, 100.0] {
        let w = dense_inverse(&a.tr_mul(&a), g) * a.transpose();
        assert!(close(&optimal_diagnostics(&a, &model, g).unwrap(), &dense_report(&w, &a, &model), 1e-10));
    }
}

#[test]
fn sketched_matches_dense_weights() {
    let a = gaussian(60, 10, 6);
    let model = LinearModelSpec::new(vector(10, 7), 2.0).unwrap();
    let sk = StreamingSketch::from_rows(&a, 4).unwrap();
    for mode in [SketchMode::Fd, SketchMode::Rfd] {
        let out = sk.finalize(mode);
        for &g in &[0.1, 3.0] {
            let w = dense_inverse(&out.b.tr_mul(&out.b), g + out.delta) * a.transpose();
            let got = sketched_diagnostics(&a, &out, &model, g).unwrap();
            assert!(close(&got, &dense_report(&w, &a, &model), 1e-10), "{mode} {g}");
        }
    }
}

#[test]
fn randomized_spectrum_matches_dense_weights() {
    let (n, d) = (50, 8);
    let a = gaussian(n, d, 8);
    let model = LinearModelSpec::new(vector(d, 9), 1.3).unwrap();
    for kind in [RandomKind::Gaussian, RandomKind::Sjlt] {
        let s = RandomSketch::new(kind, 6, n, 2, 10).unwrap().realize();
        let sa = &s * &a;
        let classical = RandomizedSpectrum::classical(&s, &a, &model.x0).unwrap();
        let hessian = RandomizedSpectrum::hessian(&sa, &a.tr_mul(&a), &model.x0).unwrap();
        for &g in &[0.05, 2.0] {
            let inv = dense_inverse(&sa.tr_mul(&sa), g);
            let wc = &inv * sa.transpose() * &s;
            let wh = &inv * a.transpose();
            assert!(close(&classical.report(&model, g).unwrap(), &dense_report(&wc, &a, &model), 1e-9));
            assert!(close(&hessian.report(&model, g).unwrap(), &dense_report(&wh, &a, &model), 1e-9));
        }
    }
}

#[test]
fn shared_spectrum_agrees_with_free_functions() {
    let a = gaussian(30, 6, 11);
    let model = LinearModelSpec::new(vector(6, 12), 1.0).unwrap();
    let spec = DataSpectrum::new(&a);
    assert_eq!(spec.optimal(&model, 0.5).unwrap(), optimal_diagnostics(&a, &model, 0.5).unwrap());
}

/// Every eigenvalue of `−M = (I − Ĥ⁻¹AᵀA)H_γ` lies in `[γ′, γ²/γ′]`.
#[test]
fn preconditioned_error_operator_eigenvalue_interval() {
    let mut checked = 0;
    for seed in 0..20u64 {
        let (n, d, m) = (30 + seed as usize, 6 + (seed % 4) as usize, 3);
        let a = gaussian(n, d, 100 + seed);
        let out = StreamingSketch::from_rows(&a, m).unwrap().finalize(SketchMode::Fd);
        let k = (seed % m as u64) as usize;
        let alpha_delta = tail(&a, k) / (m - k) as f64;
        let gamma = alpha_delta * (1.5 + seed as f64 / 4.0);
        let gamma_p = gamma - alpha_delta;
        let c = a.tr_mul(&a);
        let h = &c + DMatrix::identity(d, d) * gamma;
        let h_hat_inv = dense_inverse(&out.b.tr_mul(&out.b), gamma);
        let neg_m = (DMatrix::identity(d, d) - &h_hat_inv * &c) * &h;
        let scale = gamma * gamma / gamma_p;
        for ev in neg_m.complex_eigenvalues().iter() {
            assert!(ev.im.abs() <= 1e-8 * scale, "seed {seed}: {ev}");
            assert!(ev.re >= gamma_p * (1.0 - 1e-9) && ev.re <= scale * (1.0 + 1e-9), "seed {seed}: {ev} not in [{gamma_p}, {scale}]");
        }
        checked += 1;
    }
    assert_eq!(checked, 20);
}

#[test]
fn theta_interval_examples() {
    let t = theta_interval(20, 4, 0.0, 1.0, SketchMode::Rfd).unwrap();
    assert_eq!((t.lower(), t.upper()), (1.0, 1.0));
    let q = 1.0 - 0.5f64.sqrt();
    let t = theta_interval(10, 2, q * 8.0 * 3.0, 3.0, SketchMode::Fd).unwrap();
    assert!((t.theta - 0.5).abs() < 1e-12);
    assert!(t.contains(0.5) && t.contains(2.0) && !t.contains(2.01));
}
