mod common;

use common::{gaussian, spectral_norm, squared_singular_values, tail};
use fdridge::sketch::{tail_mass, SketchMode, SketchOutput, StreamingSketch};
use fdridge::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn covariance_error(a: &DMatrix<f64>, out: &SketchOutput) -> DMatrix<f64> {
    a.tr_mul(a) - out.covariance()
}

fn check_bound(a: &DMatrix<f64>, m: usize, mode: SketchMode) {
    let out = StreamingSketch::from_rows(a, m).unwrap().finalize(mode);
    let err = spectral_norm(&covariance_error(a, &out));
    let slack = 1e-12 * spectral_norm(&a.tr_mul(a));
    for k in 0..m {
        let bound = mode.bound_factor() * tail(a, k) / (m - k) as f64;
        assert!(err <= bound + slack, "{mode} m={m} k={k}: {err} > {bound}");
    }
}

#[test]
fn new_sketch_shapes() {
    let sk = StreamingSketch::new(4, 8).unwrap();
    assert_eq!(sk.buffer().shape(), (8, 8));
    assert_eq!(sk.rho(), 0.0);
    assert_eq!(StreamingSketch::new(1, 1).unwrap().buffer().shape(), (2, 1));
    assert!(matches!(StreamingSketch::new(0, 5), Err(Error::InvalidDimension { .. })));
}

#[test]
fn fd_bound_random_100x8() {
    check_bound(&gaussian(100, 8, 11), 4, SketchMode::Fd);
}

#[test]
fn rfd_bound_random_200x16() {
    check_bound(&gaussian(200, 16, 12), 8, SketchMode::Rfd);
}

#[test]
fn lossless_stream_reproduces_covariance() {
    let a = gaussian(5, 6, 3);
    for mode in [SketchMode::Fd, SketchMode::Rfd] {
        let out = StreamingSketch::from_rows(&a, 6).unwrap().finalize(mode);
        assert_eq!(out.delta, 0.0);
        let diff = covariance_error(&a, &out).abs().max();
        assert!(diff < 1e-12, "{diff}");
    }
}

#[test]
fn fd_output_is_orthogonal_with_zero_shift() {
    let a = gaussian(77, 10, 4);
    let sk = StreamingSketch::from_rows(&a, 4).unwrap();
    let fd = sk.finalize(SketchMode::Fd);
    assert_eq!(fd.delta, 0.0);
    assert_eq!(fd.b.shape(), (4, 10));
    let g = &fd.b * fd.b.transpose();
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                assert!(g[(i, j)].abs() < 1e-10 * g[(0, 0)], "rows {i},{j}");
            }
        }
    }
    assert!(sk.finalize(SketchMode::Rfd).delta > 0.0);
}

#[test]
fn finalize_is_non_destructive() {
    let a = gaussian(40, 6, 5);
    let mut sk = StreamingSketch::new(3, 6).unwrap();
    let mut whole = StreamingSketch::new(3, 6).unwrap();
    whole.extend_from(&a);
    let mut rows = Vec::new();
    for i in 0..40 {
        rows.push(a.row(i).iter().copied().collect::<Vec<_>>());
    }
    for (i, r) in rows.iter().enumerate() {
        sk.update(r).unwrap();
        if i % 7 == 0 {
            let _ = sk.finalize(SketchMode::Rfd);
        }
    }
    assert_eq!(sk.finalize(SketchMode::Rfd), whole.finalize(SketchMode::Rfd));
}

#[test]
fn empty_stream_finalizes_to_zero() {
    let sk = StreamingSketch::new(3, 4).unwrap();
    for mode in [SketchMode::Fd, SketchMode::Rfd] {
        let out = sk.finalize(mode);
        assert_eq!(out.b, DMatrix::zeros(3, 4));
        assert_eq!(out.delta, 0.0);
    }
}

#[test]
fn wrong_row_length_rejected() {
    let mut sk = StreamingSketch::new(2, 3).unwrap();
    assert!(matches!(
        sk.update(&[1.0, 2.0]),
        Err(Error::DimensionMismatch { expected: 3, got: 2 })
    ));
}

#[test]
fn tail_mass_oracle() {
    let eye = DMatrix::<f64>::identity(7, 7);
    assert_eq!(tail_mass(&eye, 0, 3).unwrap().delta_k, 7.0);
    let full = tail_mass(&eye, 7, 8).unwrap();
    assert!(full.delta_k.abs() < 1e-12);
    let a = gaussian(50, 10, 6);
    let t = tail_mass(&a, 3, 5).unwrap();
    let expected: f64 = squared_singular_values(&a)[3..].iter().sum();
    assert!((t.delta_k - expected).abs() < 1e-10 * expected);
    assert_eq!(t.alpha, 0.5);
    assert!(matches!(tail_mass(&a, 5, 5), Err(Error::RankOutOfRange { .. })));
    assert!(matches!(tail_mass(&a, 11, 20), Err(Error::RankOutOfRange { .. })));
    let deltas: Vec<f64> = (0..=10).map(|k| tail_mass(&a, k, 11).unwrap().delta_k).collect();
    assert!((deltas[0] - a.norm_squared()).abs() < 1e-10 * deltas[0]);
    assert!(deltas.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn checkpoint_round_trip() {
    let a = gaussian(30, 5, 8);
    let out = StreamingSketch::from_rows(&a, 2).unwrap().finalize(SketchMode::Rfd);
    let mut buf = Vec::new();
    out.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# m,d,delta,mode\n"));
    let back = SketchOutput::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.mode, out.mode);
    assert!((back.delta - out.delta).abs() <= 1e-15 * out.delta);
    for (x, y) in back.b.iter().zip(out.b.iter()) {
        assert!((x - y).abs() <= 1e-15 * y.abs());
    }
}

fn matrix(max_n: usize, max_d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0f64..10.0, n * d).prop_map(move |v| DMatrix::from_vec(n, d, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `0 ⪯ AᵀA − BᵀB ⪯ αΔ_k·I` for FD; RFD centres the error, so its
    /// check is two-sided in spectral norm.
    #[test]
    fn loewner_bounds(a in matrix(40, 8), m in 1usize..6) {
        let sk = StreamingSketch::from_rows(&a, m).unwrap();
        let scale = a.norm_squared().max(1.0);
        let fd = covariance_error(&a, &sk.finalize(SketchMode::Fd));
        let eig = fd.clone().symmetric_eigenvalues();
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rfd = spectral_norm(&covariance_error(&a, &sk.finalize(SketchMode::Rfd)));
        prop_assert!(lo >= -1e-10 * scale);
        for k in 0..m.min(a.nrows().min(a.ncols()) + 1) {
            let bound = tail(&a, k) / (m - k) as f64;
            prop_assert!(hi <= bound + 1e-10 * scale, "k={} hi={} bound={}", k, hi, bound);
            prop_assert!(rfd <= bound / 2.0 + 1e-10 * scale, "k={} rfd={} bound={}", k, rfd, bound);
        }
    }

    #[test]
    fn rho_is_monotone(a in matrix(60, 6), m in 1usize..4) {
        let mut sk = StreamingSketch::new(m, a.ncols()).unwrap();
        let mut last = 0.0;
        for i in 0..a.nrows() {
            let row: Vec<f64> = a.row(i).iter().copied().collect();
            sk.update(&row).unwrap();
            prop_assert!(sk.rho() >= last);
            prop_assert!(sk.fill() <= 2 * m);
            for r in sk.fill()..2 * m {
                prop_assert!(sk.buffer().row(r).iter().all(|&v| v == 0.0));
            }
            last = sk.rho();
        }
    }

    #[test]
    fn scale_equivariance(a in matrix(30, 6), m in 1usize..4, c in 0.1f64..10.0) {
        let sk = StreamingSketch::from_rows(&a, m).unwrap();
        let scaled = StreamingSketch::from_rows(&(&a * c), m).unwrap();
        for mode in [SketchMode::Fd, SketchMode::Rfd] {
            let base = sk.finalize(mode).covariance() * (c * c);
            let other = scaled.finalize(mode).covariance();
            let tol = 1e-9 * base.norm().max(1e-300);
            prop_assert!((base - other).norm() <= tol);
        }
    }

    #[test]
    fn bound_holds_for_any_row_order(
        (a, perm) in matrix(30, 5).prop_flat_map(|a| {
            let n = a.nrows();
            (Just(a), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        }),
        m in 1usize..4,
    ) {
        let permuted = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(perm[i], j)]);
        let scale = a.norm_squared().max(1.0);
        for mode in [SketchMode::Fd, SketchMode::Rfd] {
            let out = StreamingSketch::from_rows(&permuted, m).unwrap().finalize(mode);
            let err = spectral_norm(&covariance_error(&a, &out));
            for k in 0..m.min(a.nrows().min(a.ncols()) + 1) {
                let bound = mode.bound_factor() * tail(&a, k) / (m - k) as f64;
                prop_assert!(err <= bound + 1e-10 * scale);
            }
        }
    }
}
