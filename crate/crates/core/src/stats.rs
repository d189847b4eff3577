//! Bias, variance trace and MSE of ridge estimators under the linear model
//! `y = A x₀ + ε`, `E ε = 0`, `E εεᵀ = σ²I`, in closed form.
//!
//! Every estimator here is linear in `y`, `x̂ = W y`, so
//! `bias = W A x₀ − x₀` and `trace(var) = σ²‖W‖_F²`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::par::Exec;
use crate::ridge::InverseOperator;
use crate::sketch::{SketchMode, SketchOutput, TailSpectrum};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModelSpec {
    pub x0: DVector<f64>,
    pub sigma: f64,
}

impl LinearModelSpec {
    pub fn new(x0: DVector<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidSpec(format!("noise level must be positive, got {sigma}")));
        }
        Ok(Self { x0, sigma })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub bias_sq: f64,
    pub var_trace: f64,
    pub mse: f64,
}

/// One value per metric; `None` where the optimal value is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricTriple {
    pub bias: Option<f64>,
    pub var: Option<f64>,
    pub mse: Option<f64>,
}

impl MetricTriple {
    pub fn as_array(&self) -> [Option<f64>; 3] {
        [self.bias, self.var, self.mse]
    }
}

impl DiagnosticsReport {
    pub fn new(bias_sq: f64, var_trace: f64) -> Self {
        Self {
            bias_sq,
            var_trace,
            mse: bias_sq + var_trace,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.bias_sq, self.var_trace, self.mse]
    }

    /// `|û − u*| / u*` per metric.
    pub fn relative_errors(&self, optimal: &DiagnosticsReport) -> MetricTriple {
        let rel = |u: f64, star: f64| (star != 0.0).then(|| (u - star).abs() / star);
        MetricTriple {
            bias: rel(self.bias_sq, optimal.bias_sq),
            var: rel(self.var_trace, optimal.var_trace),
            mse: rel(self.mse, optimal.mse),
        }
    }

    /// `û / u*` per metric.
    pub fn ratios(&self, optimal: &DiagnosticsReport) -> MetricTriple {
        let ratio = |u: f64, star: f64| (star != 0.0).then(|| u / star);
        MetricTriple {
            bias: ratio(self.bias_sq, optimal.bias_sq),
            var: ratio(self.var_trace, optimal.var_trace),
            mse: ratio(self.mse, optimal.mse),
        }
    }

    /// Element-wise median over trials.
    pub fn median(reports: &[DiagnosticsReport]) -> Option<DiagnosticsReport> {
        if reports.is_empty() {
            return None;
        }
        let med = |f: fn(&DiagnosticsReport) -> f64| median(reports.iter().map(f).collect());
        Some(DiagnosticsReport {
            bias_sq: med(|r| r.bias_sq),
            var_trace: med(|r| r.var_trace),
            mse: med(|r| r.mse),
        })
    }
}

/// Median of finite and non-finite values alike (NaN sorts last).
pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `AᵀA` and its eigendecomposition, computed once per data matrix and
/// shared across the γ grid.
#[derive(Clone, Debug)]
pub struct DataSpectrum {
    gram: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    exec: Exec,
}

impl DataSpectrum {
    pub fn new(a: &DMatrix<f64>) -> Self {
        Self::from_gram(a.tr_mul(a))
    }

    pub fn from_gram(gram: DMatrix<f64>) -> Self {
        let (eigenvalues, eigenvectors) = sym_eigen_desc(&gram);
        Self {
            gram,
            eigenvalues: eigenvalues.map(|l| l.max(0.0)),
            eigenvectors,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `bias(x*) = −γH_γ⁻¹x₀`, `var(x*) = σ²H_γ⁻¹AᵀAH_γ⁻¹`.
    pub fn optimal(&self, model: &LinearModelSpec, gamma: f64) -> Result<DiagnosticsReport> {
        self.check(model, gamma)?;
        let z = self.eigenvectors.tr_mul(&model.x0);
        let mut bias_sq = 0.0;
        let mut var = 0.0;
        for (l, zi) in self.eigenvalues.iter().zip(z.iter()) {
            let inv = 1.0 / (l + gamma);
            bias_sq += (gamma * zi * inv).powi(2);
            var += l * inv * inv;
        }
        Ok(DiagnosticsReport::new(bias_sq, model.sigma * model.sigma * var))
    }

    /// `bias(x̂) = (Ĥ⁻¹AᵀA − I)x₀`, `var(x̂) = σ²Ĥ⁻¹AᵀAĤ⁻¹` with
    /// `Ĥ = BᵀB + (γ+δ)I`. All `Ĥ⁻¹` products go through the
    /// [`InverseOperator`]; the variance trace takes `d` applications.
    pub fn sketched(
        &self,
        output: &SketchOutput,
        model: &LinearModelSpec,
        gamma: f64,
    ) -> Result<DiagnosticsReport> {
        self.check(model, gamma)?;
        if output.d() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: output.d(),
            });
        }
        let op = InverseOperator::for_sketch(output, gamma)?;
        // (Ĥ⁻¹AᵀA − I)x₀ = −Ĥ⁻¹(γ_t x₀ − (AᵀA − BᵀB)x₀); avoids cancelling two
        // nearly equal vectors when the sketch is accurate.
        let b = &output.b;
        let gap = &self.gram * &model.x0 - b.tr_mul(&(b * &model.x0));
        let bias = -op.apply(&(&model.x0 * op.gamma_total() - gap));

        let var = self.variance_trace(&op) * model.sigma * model.sigma;
        Ok(DiagnosticsReport::new(bias.norm_squared(), var))
    }

    /// `Σ_j (Ĥ⁻¹e_j)ᵀ AᵀA (Ĥ⁻¹e_j) = ‖AĤ⁻¹‖_F²`, columns in blocks.
    fn variance_trace(&self, op: &InverseOperator) -> f64 {
        const BLOCK: usize = 64;
        let d = self.dim();
        let blocks = d.div_ceil(BLOCK);
        let parts = self.exec.map_range(blocks, |blk| {
            let start = blk * BLOCK;
            let width = BLOCK.min(d - start);
            let mut e = DMatrix::zeros(d, width);
            for j in 0..width {
                e[(start + j, j)] = 1.0;
            }
            let x = op.apply_matrix(&e);
            let cx = &self.gram * &x;
            x.component_mul(&cx).sum()
        });
        parts.into_iter().sum()
    }

    fn check(&self, model: &LinearModelSpec, gamma: f64) -> Result<()> {
        if !(gamma > 0.0) {
            return Err(Error::NonpositiveRegularizer(gamma));
        }
        if model.x0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: model.x0.len(),
            });
        }
        Ok(())
    }
}

pub fn optimal_diagnostics(
    a: &DMatrix<f64>,
    model: &LinearModelSpec,
    gamma: f64,
) -> Result<DiagnosticsReport> {
    DataSpectrum::new(a).optimal(model, gamma)
}

pub fn sketched_diagnostics(
    a: &DMatrix<f64>,
    output: &SketchOutput,
    model: &LinearModelSpec,
    gamma: f64,
) -> Result<DiagnosticsReport> {
    DataSpectrum::new(a).sketched(output, model, gamma)
}

/// Randomized one-shot estimators `x̂ = (AᵀSᵀSA + γI)⁻¹ G y` with
/// `G = AᵀSᵀS` (Classical) or `G = Aᵀ` (Hessian), reduced to the
/// eigenbasis of `AᵀSᵀSA` so that every γ costs `O(d)`.
#[derive(Clone, Debug)]
pub struct RandomizedSpectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    /// `‖(VᵀG)_i‖²`
    row_energy: DVector<f64>,
    /// `VᵀGAx₀`
    signal: DVector<f64>,
}

impl RandomizedSpectrum {
    /// Classical sketch from the realized `S` (`m × n`) and `A`.
    pub fn classical(s: &DMatrix<f64>, a: &DMatrix<f64>, x0: &DVector<f64>) -> Result<Self> {
        if s.ncols() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: s.ncols(),
            });
        }
        let sa = s * a;
        let sst = s * s.transpose();
        let ggt = sa.tr_mul(&(&sst * &sa));
        let g_ax0 = sa.tr_mul(&(&sa * x0));
        Ok(Self::build(&sa, &ggt, &g_ax0))
    }

    /// Hessian sketch from `SA` and the exact Gram `AᵀA`.
    pub fn hessian(sa: &DMatrix<f64>, gram: &DMatrix<f64>, x0: &DVector<f64>) -> Result<Self> {
        if sa.ncols() != gram.nrows() {
            return Err(Error::DimensionMismatch {
                expected: gram.nrows(),
                got: sa.ncols(),
            });
        }
        Ok(Self::build(sa, gram, &(gram * x0)))
    }

    fn build(sa: &DMatrix<f64>, ggt: &DMatrix<f64>, g_ax0: &DVector<f64>) -> Self {
        let (eigenvalues, eigenvectors) = sym_eigen_desc(&sa.tr_mul(sa));
        let tv = ggt * &eigenvectors;
        let row_energy = DVector::from_fn(eigenvectors.ncols(), |i, _| {
            eigenvectors.column(i).dot(&tv.column(i))
        });
        Self {
            eigenvalues: eigenvalues.map(|l| l.max(0.0)),
            signal: eigenvectors.tr_mul(g_ax0),
            eigenvectors,
            row_energy,
        }
    }

    pub fn report(&self, model: &LinearModelSpec, gamma: f64) -> Result<DiagnosticsReport> {
        if !(gamma > 0.0) {
            return Err(Error::NonpositiveRegularizer(gamma));
        }
        let inv = self.eigenvalues.map(|l| 1.0 / (l + gamma));
        let mean = &self.eigenvectors * self.signal.component_mul(&inv);
        let bias = mean - &model.x0;
        let var: f64 = self
            .row_energy
            .iter()
            .zip(inv.iter())
            .map(|(e, w)| e * w * w)
            .sum();
        Ok(DiagnosticsReport::new(
            bias.norm_squared(),
            model.sigma * model.sigma * var,
        ))
    }
}

/// Relative-error band `[1 − θ, 1/(1 − θ)]` implied by a sketch budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaBudget {
    pub theta: f64,
    pub m: usize,
    pub k: usize,
    pub mode: SketchMode,
}

impl ThetaBudget {
    pub fn lower(&self) -> f64 {
        1.0 - self.theta
    }

    pub fn upper(&self) -> f64 {
        1.0 / (1.0 - self.theta)
    }

    pub fn contains(&self, ratio: f64) -> bool {
        interval_contains(self.theta, ratio)
    }
}

/// `ratio ∈ [1 − θ, 1/(1 − θ)]` with a relative slack of `1e−12` for
/// round-off at the exact endpoints.
pub fn interval_contains(theta: f64, ratio: f64) -> bool {
    let lo = 1.0 - theta;
    let hi = 1.0 / (1.0 - theta);
    ratio >= lo * (1.0 - 1e-12) && ratio <= hi * (1.0 + 1e-12)
}

/// Effective tail ratio `q = α′Δ_k/γ` for the mode (`α′ = α` for FD, `α/2`
/// for RFD).
fn tail_ratio(m: f64, k: usize, delta_k: f64, gamma: f64, mode: SketchMode) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::NonpositiveRegularizer(gamma));
    }
    if !(m > k as f64) {
        return Err(Error::RankOutOfRange {
            k,
            constraint: format!("k < m = {m}"),
        });
    }
    let tail = mode.bound_factor() * delta_k / (m - k as f64);
    if tail >= gamma {
        return Err(Error::BudgetInfeasible { tail, limit: gamma });
    }
    Ok(tail / gamma)
}

/// `θ` for a (possibly fractional) budget `m`: `1 − √(1−θ) = α′Δ_k/γ`.
pub fn theta_for_budget(m: f64, k: usize, delta_k: f64, gamma: f64, mode: SketchMode) -> Result<f64> {
    let q = tail_ratio(m, k, delta_k, gamma, mode)?;
    Ok(1.0 - (1.0 - q) * (1.0 - q))
}

pub fn theta_interval(
    m: usize,
    k: usize,
    delta_k: f64,
    gamma: f64,
    mode: SketchMode,
) -> Result<ThetaBudget> {
    Ok(ThetaBudget {
        theta: theta_for_budget(m as f64, k, delta_k, gamma, mode)?,
        m,
        k,
        mode,
    })
}

/// Real-valued budget `m = Δ_k/(c(1 − √(1−θ))γ) + k`, `c = 1` (FD), `2` (RFD).
pub fn budget_for_theta(theta: f64, k: usize, delta_k: f64, gamma: f64, mode: SketchMode) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidSpec(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::NonpositiveRegularizer(gamma));
    }
    let shrink = 1.0 - (1.0 - theta).sqrt();
    Ok(mode.bound_factor() * delta_k / (shrink * gamma) + k as f64)
}

/// Smallest `k` whose integer budget `⌈m(θ, k)⌉` fits within `max_m`.
pub fn smallest_feasible_budget(
    theta: f64,
    spectrum: &TailSpectrum,
    gamma: f64,
    mode: SketchMode,
    max_m: usize,
) -> Result<Option<ThetaBudget>> {
    for k in 0..=spectrum.rank_limit() {
        let m_real = budget_for_theta(theta, k, spectrum.delta(k)?, gamma, mode)?;
        let m = m_real.ceil().max(k as f64 + 1.0);
        if m <= max_m as f64 {
            return Ok(Some(ThetaBudget {
                theta,
                m: m as usize,
                k,
                mode,
            }));
        }
    }
    Ok(None)
}

/// RFD's sharper parameter at the same budget: `1 − θ′ = ((1 + √(1−θ))/2)²`.
pub fn rfd_theta(theta: f64) -> f64 {
    let c = (1.0 - theta).sqrt();
    1.0 - ((1.0 + c) / 2.0).powi(2)
}
