//! Runner and fixtures for the acceptance suite.
//!
//! Each check runs to completion on the calling thread, one after another,
//! so reported wall times are not inflated by concurrent checks.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Result of one check: pass flag plus a one-line summary.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Default)]
pub struct Suite {
    results: Vec<(String, bool)>,
}

impl Suite {
    /// Run `check`, enforce `limit` on its wall time, print its line.
    pub fn run(&mut self, id: &str, title: &str, limit: Duration, check: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass, v.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                (false, format!("panicked: {msg}"))
            }
        };
        let in_time = elapsed <= limit;
        let pass = pass && in_time;
        let timing = format!("{:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs());
        let timing = if in_time { timing } else { format!("{timing}, OVER TIME") };
        println!(
            "{} criterion {id:<2} {title}: {detail} [{timing}]",
            if pass { "PASS" } else { "FAIL" }
        );
        self.results.push((id.to_string(), pass));
    }

    /// Print the tally; `true` if everything passed.
    pub fn finish(&self) -> bool {
        let failed: Vec<&str> = self.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
        println!(
            "acceptance: {} passed, {} failed{}",
            self.results.len() - failed.len(),
            failed.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(" ({})", failed.join(", "))
            }
        );
        failed.is_empty()
    }
}

pub fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
}

pub fn vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

/// `U diag(s) Vᵀ` with random orthonormal factors, `U` of size `n × d`.
pub fn with_singular_values(n: usize, s: &[f64], seed: u64) -> DMatrix<f64> {
    let d = s.len();
    let u = gaussian(n, d, seed).qr().q();
    let v = gaussian(d, d, seed.wrapping_add(1)).qr().q();
    u * DMatrix::from_diagonal(&DVector::from_column_slice(s)) * v.transpose()
}

/// `(M + γI)⁻¹` by explicit inversion.
pub fn dense_inverse(m: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let mut h = m.clone();
    for i in 0..h.nrows() {
        h[(i, i)] += gamma;
    }
    h.try_inverse().expect("shifted matrix is invertible")
}

/// Largest `|λ|` of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Suffix sums of squared singular values: `tails[k] = Σ_{i ≥ k} σᵢ²`.
pub fn tails(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().map(|x| x * x).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let mut out = vec![0.0; s.len() + 1];
    for i in (0..s.len()).rev() {
        out[i] = out[i + 1] + s[i];
    }
    out
}

pub fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
