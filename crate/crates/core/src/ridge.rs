//! Ridge regression solvers: exact, FD/RFD sketched (one-shot and
//! iterative), Classical and Hessian sketch, and the randomized iterative
//! baselines.
//!
//! All solvers target `min_x ½‖Ax − y‖² + ½γ‖x‖²`, whose Hessian is
//! `H_γ = AᵀA + γI`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{shifted_gram, spd_solve, svd_values_vt};
use crate::rows::RowSource;
use crate::sketch::{SketchMode, SketchOutput, StreamingSketch};

/// Iterates are abandoned once `‖x‖` exceeds this multiple of `‖Aᵀy‖/γ`.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

#[derive(Clone, Copy)]
pub struct RidgeProblem<'a, S: RowSource + ?Sized> {
    pub a: &'a S,
    pub y: &'a DVector<f64>,
    pub gamma: f64,
}

impl<'a, S: RowSource + ?Sized> RidgeProblem<'a, S> {
    pub fn new(a: &'a S, y: &'a DVector<f64>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::NonpositiveRegularizer(gamma));
        }
        if a.n_rows() == 0 {
            return Err(Error::InvalidDimension {
                m: a.n_rows(),
                d: a.n_cols(),
            });
        }
        if y.len() != a.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                got: y.len(),
            });
        }
        Ok(Self { a, y, gamma })
    }

    pub fn dim(&self) -> usize {
        self.a.n_cols()
    }

    /// `Aᵀy`.
    pub fn aty(&self) -> DVector<f64> {
        self.a.tr_mul_vec(self.y)
    }

    /// `∇f(x) = Aᵀ(Ax − y) + γx`, two streaming products, `AᵀA` never formed.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let residual = self.a.mul_vec(x) - self.y;
        self.a.tr_mul_vec(&residual) + x * self.gamma
    }
}

/// `x* = (AᵀA + γI)⁻¹Aᵀy` by Cholesky on the dense `d × d` Hessian.
pub fn solve_exact<S: RowSource + ?Sized>(problem: &RidgeProblem<'_, S>) -> DVector<f64> {
    let mut h = problem.a.gram();
    for i in 0..h.nrows() {
        h[(i, i)] += problem.gamma;
    }
    spd_solve(&h, &problem.aty())
}

/// Implicit `(BᵀB + γ_t·I)⁻¹` from one thin SVD of `B`:
/// `v ↦ v/γ_t + V·diag(1/(σᵢ²+γ_t) − 1/γ_t)·Vᵀv`, `O(md)` per application.
#[derive(Clone, Debug)]
pub struct InverseOperator {
    v: DMatrix<f64>,
    spectrum: DVector<f64>,
    gamma_total: f64,
    /// `1/(σᵢ²+γ_t) − 1/γ_t`
    correction: DVector<f64>,
}

impl InverseOperator {
    pub fn new(b: &DMatrix<f64>, gamma_total: f64) -> Result<Self> {
        if !(gamma_total > 0.0) {
            return Err(Error::NonpositiveRegularizer(gamma_total));
        }
        let (s, vt) = if b.nrows() == 0 {
            (Vec::new(), DMatrix::zeros(0, b.ncols()))
        } else {
            svd_values_vt(b)
        };
        let spectrum = DVector::from_iterator(s.len(), s.iter().map(|x| x * x));
        let correction = spectrum.map(|l| 1.0 / (l + gamma_total) - 1.0 / gamma_total);
        Ok(Self {
            v: vt.transpose(),
            spectrum,
            gamma_total,
            correction,
        })
    }

    /// Operator for a finalized sketch at ridge `γ`: `(BᵀB + (γ+δ)I)⁻¹`.
    pub fn for_sketch(output: &SketchOutput, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::NonpositiveRegularizer(gamma));
        }
        Self::new(&output.b, gamma + output.delta)
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn gamma_total(&self) -> f64 {
        self.gamma_total
    }

    /// `σᵢ²` of `B`, decreasing.
    pub fn spectrum(&self) -> &DVector<f64> {
        &self.spectrum
    }

    /// Right singular vectors of `B` as columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut coeff = self.v.tr_mul(x);
        coeff.component_mul_assign(&self.correction);
        let mut out = x / self.gamma_total;
        out.gemv(1.0, &self.v, &coeff, 1.0);
        out
    }

    /// Column-wise application to a `d × k` matrix.
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coeff = self.v.tr_mul(x);
        for (i, mut row) in coeff.row_iter_mut().enumerate() {
            row *= self.correction[i];
        }
        let mut out = x / self.gamma_total;
        out.gemm(1.0, &self.v, &coeff, 1.0);
        out
    }

    /// Dense `(BᵀB + γ_t I)⁻¹`; `d` applications.
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.apply_matrix(&DMatrix::identity(self.dim(), self.dim()))
    }
}

/// Sketch and `Aᵀy` from a single pass over the rows.
pub fn sketch_with_rhs<S: RowSource + ?Sized>(
    problem: &RidgeProblem<'_, S>,
    m: usize,
) -> Result<(StreamingSketch, DVector<f64>)> {
    let d = problem.dim();
    let mut sketch = StreamingSketch::new(m, d)?;
    let mut c = DVector::zeros(d);
    let y = problem.y;
    let mut failure = None;
    problem.a.for_each_row(&mut |i, row| {
        if failure.is_some() {
            return;
        }
        if let Err(e) = sketch.update(row) {
            failure = Some(e);
            return;
        }
        let w = y[i];
        for (cj, &aij) in c.iter_mut().zip(row) {
            *cj += w * aij;
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok((sketch, c)),
    }
}

/// FD ridge regression: `x̂ = (BᵀB + (γ+δ)I)⁻¹Aᵀy`.
pub fn fdrr_solve<S: RowSource + ?Sized>(
    problem: &RidgeProblem<'_, S>,
    m: usize,
    mode: SketchMode,
) -> Result<DVector<f64>> {
    let (sketch, c) = sketch_with_rhs(problem, m)?;
    let op = InverseOperator::for_sketch(&sketch.finalize(mode), problem.gamma)?;
    Ok(op.apply(&c))
}

/// Classical sketch: `(AᵀSᵀSA + γI)⁻¹AᵀSᵀSy`.
pub fn classical_sketch_solve(
    sa: &DMatrix<f64>,
    sy: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    if sy.len() != sa.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sa.nrows(),
            got: sy.len(),
        });
    }
    sketched_hessian_solve(sa, &sa.tr_mul(sy), gamma)
}

/// Hessian sketch: `(AᵀSᵀSA + γI)⁻¹Aᵀy`.
pub fn hessian_sketch_solve(
    sa: &DMatrix<f64>,
    aty: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    if aty.len() != sa.ncols() {
        return Err(Error::DimensionMismatch {
            expected: sa.ncols(),
            got: aty.len(),
        });
    }
    sketched_hessian_solve(sa, aty, gamma)
}

fn sketched_hessian_solve(
    sa: &DMatrix<f64>,
    rhs: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::NonpositiveRegularizer(gamma));
    }
    Ok(spd_solve(&shifted_gram(sa, gamma), rhs))
}

/// Iterates of a preconditioned Newton-type scheme. `iterates[0]` is the
/// zero vector. `diverged_at` is set when the divergence guard fired; the
/// offending iterate is not stored.
#[derive(Clone, Debug, Default)]
pub struct IterativeTrace {
    pub iterates: Vec<DVector<f64>>,
    pub diverged_at: Option<usize>,
}

impl IterativeTrace {
    /// Completed iterations (excluding the starting point).
    pub fn steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    /// `‖x⁽ⁱ⁾ − x*‖₂` for every stored iterate.
    pub fn errors(&self, x_star: &DVector<f64>) -> Vec<f64> {
        self.iterates.iter().map(|x| (x - x_star).norm()).collect()
    }

    /// `‖x⁽ⁱ⁾ − x*‖₂ / ‖x*‖₂`.
    pub fn relative_errors(&self, x_star: &DVector<f64>) -> Vec<f64> {
        let scale = x_star.norm();
        self.errors(x_star).into_iter().map(|e| e / scale).collect()
    }
}

/// Run exactly `t` steps `x ← x − P_i(∇f(x))` from `x = 0`, stopping early
/// only when the divergence guard fires.
pub fn preconditioned_iterations<S, P>(
    problem: &RidgeProblem<'_, S>,
    t: usize,
    mut precondition: P,
) -> Result<IterativeTrace>
where
    S: RowSource + ?Sized,
    P: FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
{
    let d = problem.dim();
    let limit = DIVERGENCE_FACTOR * problem.aty().norm() / problem.gamma;
    let mut x = DVector::zeros(d);
    let mut trace = IterativeTrace {
        iterates: vec![x.clone()],
        diverged_at: None,
    };
    for i in 1..=t {
        let step = precondition(i, &problem.gradient(&x))?;
        x -= step;
        let norm = x.norm();
        if !norm.is_finite() || norm > limit.max(f64::MIN_POSITIVE) {
            trace.diverged_at = Some(i);
            break;
        }
        trace.iterates.push(x.clone());
    }
    Ok(trace)
}

fn finish(trace: IterativeTrace) -> Result<(DVector<f64>, IterativeTrace)> {
    if let Some(iteration) = trace.diverged_at {
        return Err(Error::Diverged {
            iteration,
            norm: f64::INFINITY,
        });
    }
    let last = trace.iterates.last().cloned().unwrap_or_default();
    Ok((last, trace))
}

/// Iterative FD ridge regression with a single sketch reused as the
/// preconditioner `Ĥ = BᵀB + (γ+δ)I`.
pub fn ifdrr_solve<S: RowSource + ?Sized>(
    problem: &RidgeProblem<'_, S>,
    m: usize,
    t: usize,
    mode: SketchMode,
) -> Result<(DVector<f64>, IterativeTrace)> {
    let sketch = StreamingSketch::from_rows(problem.a, m)?;
    let op = InverseOperator::for_sketch(&sketch.finalize(mode), problem.gamma)?;
    finish(ifdrr_trace(problem, &op, t)?)
}

/// `ifdrr` iterations against a prebuilt operator; divergence is reported
/// in the trace instead of as an error.
pub fn ifdrr_trace<S: RowSource + ?Sized>(
    problem: &RidgeProblem<'_, S>,
    op: &InverseOperator,
    t: usize,
) -> Result<IterativeTrace> {
    if t == 0 {
        return Err(Error::InvalidSpec("iteration count must be at least 1".into()));
    }
    if op.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: op.dim(),
        });
    }
    preconditioned_iterations(problem, t, |_, g| Ok(op.apply(g)))
}

/// Randomized iterative solver with step size 1 and
/// `H̃ = AᵀSᵀSA + γI`. `sketch_factory(i)` returns `SA` for the `i`-th draw;
/// with `refresh` a new sketch is drawn every iteration (Iterative Hessian
/// Sketch), otherwise draw 0 is reused.
pub fn iterative_randomized_solve<S, F>(
    problem: &RidgeProblem<'_, S>,
    sketch_factory: F,
    t: usize,
    refresh: bool,
) -> Result<(DVector<f64>, IterativeTrace)>
where
    S: RowSource + ?Sized,
    F: FnMut(usize) -> Result<DMatrix<f64>>,
{
    finish(iterative_randomized_trace(problem, sketch_factory, t, refresh)?)
}

pub fn iterative_randomized_trace<S, F>(
    problem: &RidgeProblem<'_, S>,
    mut sketch_factory: F,
    t: usize,
    refresh: bool,
) -> Result<IterativeTrace>
where
    S: RowSource + ?Sized,
    F: FnMut(usize) -> Result<DMatrix<f64>>,
{
    if t == 0 {
        return Err(Error::InvalidSpec("iteration count must be at least 1".into()));
    }
    let gamma = problem.gamma;
    let mut factor: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> = None;
    preconditioned_iterations(problem, t, |i, g| {
        if refresh || factor.is_none() {
            let draw = if refresh { i - 1 } else { 0 };
            let sa = sketch_factory(draw)?;
            if sa.ncols() != problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: problem.dim(),
                    got: sa.ncols(),
                });
            }
            factor = shifted_gram(&sa, gamma).cholesky();
        }
        Ok(match &factor {
            Some(ch) => ch.solve(g),
            None => DVector::from_element(g.len(), f64::NAN),
        })
    })
}
