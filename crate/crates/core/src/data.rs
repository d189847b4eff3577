//! Regression instances: synthetic low-effective-rank data, libsvm files and
//! random Fourier feature expansion.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rows::RowSource;

/// RNG streams used by [`synthetic_regression`].
const STREAM_DESIGN: u64 = 0;
const STREAM_SIGNAL: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Effective-rank fraction in (0, 1).
    pub r: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// `R = ⌊r·d + 0.5⌋`.
    pub fn effective_rank(&self) -> usize {
        (self.r * self.d as f64 + 0.5).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidSpec(format!(
                "n and d must be positive, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::InvalidSpec(format!("r must lie in (0, 1), got {}", self.r)));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise_sd must be non-negative, got {}",
                self.noise_sd
            )));
        }
        let big_r = self.effective_rank();
        if big_r == 0 || big_r > self.d {
            return Err(Error::InvalidSpec(format!(
                "effective rank {big_r} must lie in [1, d = {}]",
                self.d
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RegressionInstance {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub x0: DVector<f64>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Row `i` (0-based) has i.i.d. `N(0, s_i²)` entries, `s_i = exp(−i²/R²)`,
/// and the whole matrix is then rotated by the orthonormal DCT-II.
pub fn synthetic_regression(spec: &SyntheticSpec) -> Result<RegressionInstance> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let big_r = spec.effective_rank() as f64;

    let mut rng = stream(spec.seed, STREAM_DESIGN);
    let mut a0 = DMatrix::zeros(n, d);
    for i in 0..n {
        let s = (-((i * i) as f64) / (big_r * big_r)).exp();
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            a0[(i, j)] = s * z;
        }
    }
    let a = a0 * dct_rotation(d);

    let mut rng = stream(spec.seed, STREAM_SIGNAL);
    let mut x0 = DVector::zeros(d);
    for v in x0.iter_mut().take(spec.effective_rank()) {
        *v = StandardNormal.sample(&mut rng);
    }
    let norm = x0.norm();
    if norm > 0.0 {
        x0 /= norm;
    }

    let mut rng = stream(spec.seed, STREAM_NOISE);
    let mut y = &a * &x0;
    for v in y.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += spec.noise_sd * z;
    }
    Ok(RegressionInstance { a, y, x0 })
}

/// Orthonormal DCT-II: `Q[k][j] = c_k cos(π(2j+1)k/(2d))`, `c_0 = √(1/d)`,
/// `c_k = √(2/d)` otherwise.
pub fn dct_rotation(d: usize) -> DMatrix<f64> {
    let n = d as f64;
    DMatrix::from_fn(d, d, |k, j| {
        let c = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        c * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * n)).cos()
    })
}

/// Sparse rows with strictly increasing 0-based column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRowMatrix {
    d: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRowMatrix {
    pub fn new(d: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            for w in row.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::InvalidSpec(format!(
                        "row {i}: indices not strictly increasing ({} then {})",
                        w[0].0, w[1].0
                    )));
                }
            }
            if let Some(&(last, _)) = row.last() {
                if last >= d {
                    return Err(Error::InvalidSpec(format!("row {i}: index {last} >= d = {d}")));
                }
            }
        }
        Ok(Self { d, rows })
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.d);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }
}

impl RowSource for SparseRowMatrix {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_cols(&self) -> usize {
        self.d
    }

    fn for_each_row(&self, f: &mut dyn FnMut(usize, &[f64])) {
        let mut buf = vec![0.0; self.d];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                buf[j] = v;
            }
            f(i, &buf);
            for &(j, _) in row {
                buf[j] = 0.0;
            }
        }
    }

    fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| row.iter().map(|&(j, v)| v * x[j]).sum()),
        )
    }

    fn tr_mul_vec(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.d);
        for (row, &w) in self.rows.iter().zip(r.iter()) {
            for &(j, v) in row {
                out[j] += w * v;
            }
        }
        out
    }
}

fn parse_err(line: usize, column: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        reason: reason.into(),
    }
}

/// Parse `label idx:val idx:val …` lines (1-based indices). Blank lines and
/// `#` comments are skipped. `d` defaults to the largest index seen; an
/// explicit `n_features` must cover every index.
pub fn parse_libsvm<R: BufRead>(
    reader: R,
    n_features: Option<usize>,
) -> Result<(SparseRowMatrix, DVector<f64>)> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let mut tokens = tokens_with_columns(content);
        let Some((col, label)) = tokens.next() else {
            continue;
        };
        let label: f64 = label
            .parse()
            .map_err(|_| parse_err(lineno, col, format!("invalid label `{label}`")))?;

        let mut row: Vec<(usize, f64)> = Vec::new();
        for (col, tok) in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, col, format!("expected `index:value`, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, col, format!("invalid index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err(lineno, col, "indices are 1-based; got 0"));
            }
            let val: f64 = val.parse().map_err(|_| {
                parse_err(lineno, col + idx.to_string().len() + 1, format!("invalid value `{val}`"))
            })?;
            if let Some(&(prev, _)) = row.last() {
                if idx - 1 <= prev {
                    return Err(parse_err(
                        lineno,
                        col,
                        format!("index {idx} does not increase past {}", prev + 1),
                    ));
                }
            }
            if let Some(d) = n_features {
                if idx > d {
                    return Err(parse_err(
                        lineno,
                        col,
                        format!("index {idx} exceeds the declared {d} features"),
                    ));
                }
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }

    let d = n_features.unwrap_or(max_index);
    Ok((SparseRowMatrix::new(d, rows)?, DVector::from_vec(labels)))
}

/// Whitespace-separated tokens with their 1-based character columns.
fn tokens_with_columns(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.split_ascii_whitespace().map(move |tok| {
        let byte = tok.as_ptr() as usize - s.as_ptr() as usize;
        (s[..byte].chars().count() + 1, tok)
    })
}

/// Inverse of [`parse_libsvm`]; values use the shortest round-trip form.
pub fn write_libsvm<W: Write>(mut w: W, matrix: &SparseRowMatrix, labels: &DVector<f64>) -> Result<()> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.n_rows(),
            got: labels.len(),
        });
    }
    for (row, label) in matrix.rows.iter().zip(labels.iter()) {
        write!(w, "{label:?}")?;
        for &(j, v) in row {
            write!(w, " {}:{v:?}", j + 1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `z(x) = √(2/D)·cos(Wx + b)`, `W_ij ~ N(0, 2γ)`, `b ~ U[0, 2π)`; the
/// features approximate the kernel `exp(−γ‖x − x′‖²)`.
pub fn rff_expand(x: &DMatrix<f64>, features: usize, gamma_rbf: f64, seed: u64) -> Result<DMatrix<f64>> {
    if features == 0 {
        return Err(Error::InvalidSpec("number of random features must be positive".into()));
    }
    if !(gamma_rbf > 0.0) {
        return Err(Error::InvalidSpec(format!("gamma_rbf must be positive, got {gamma_rbf}")));
    }
    let d0 = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (2.0 * gamma_rbf).sqrt())
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let w = DMatrix::from_fn(features, d0, |_, _| normal.sample(&mut rng));
    let b = DVector::from_fn(features, |_, _| rng.random_range(0.0..2.0 * PI));

    let scale = (2.0 / features as f64).sqrt();
    let mut z = x * w.transpose();
    for (j, bj) in b.iter().enumerate() {
        for v in z.column_mut(j).iter_mut() {
            *v = scale * (*v + bj).cos();
        }
    }
    Ok(z)
}

/// Low-dimensional smooth regression: `x ~ U[0,1]^{d₀}`,
/// `y = sin(Σ x) + noise_sd·N(0,1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformSpec {
    pub n: usize,
    pub d0: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

pub fn uniform_regression(spec: &UniformSpec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if spec.n == 0 || spec.d0 == 0 {
        return Err(Error::InvalidSpec("n and d0 must be positive".into()));
    }
    let mut rng = stream(spec.seed, STREAM_DESIGN);
    let x = DMatrix::from_fn(spec.n, spec.d0, |_, _| rng.random::<f64>());
    let mut rng = stream(spec.seed, STREAM_NOISE);
    let y = DVector::from_fn(spec.n, |i, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        x.row(i).sum().sin() + spec.noise_sd * z
    });
    Ok((x, y))
}

/// Plain CSV, one matrix row per line, 17 significant digits.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        let mut col = 1;
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno + 1, col, format!("invalid number `{field}`")))?;
            data.push(v);
            count += 1;
            col += field.len() + 1;
        }
        match ncols {
            None => ncols = Some(count),
            Some(c) if c != count => {
                return Err(parse_err(lineno + 1, 1, format!("expected {c} fields, got {count}")));
            }
            _ => {}
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols.unwrap_or(0), &data))
}
