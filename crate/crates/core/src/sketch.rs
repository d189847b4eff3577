//! Frequent Directions (FD) and Robust Frequent Directions (RFD).
//!
//! The sketch keeps a `2m × d` buffer. Rows are appended until the buffer is
//! full, at which point the buffer is replaced by `√max(Σ² − σ_m²·I, 0)·Vᵀ`
//! and half of the removed mass `σ_m²` is added to the shift `ρ`. For every
//! `k < m` the finalized output satisfies
//!
//! ```text
//! 0 ⪯ AᵀA − (BᵀB + δI) ⪯ α′·Δ_k·I,   α′ = 1/(m−k) (FD),  1/(2(m−k)) (RFD)
//! ```
//!
//! where `Δ_k = ‖A − A_k‖_F²` and `δ = ρ` for RFD, `0` for FD.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{singular_values_desc, svd_values_vt};
use crate::rows::RowSource;

/// Singular values below this fraction of the largest are treated as zero
/// when shrinking.
pub const ZERO_SINGULAR_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SketchMode {
    Fd,
    Rfd,
}

impl SketchMode {
    /// Factor multiplying `Δ_k/(m−k)` in the covariance bound.
    pub fn bound_factor(self) -> f64 {
        match self {
            SketchMode::Fd => 1.0,
            SketchMode::Rfd => 0.5,
        }
    }
}

impl fmt::Display for SketchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SketchMode::Fd => "FD",
            SketchMode::Rfd => "RFD",
        })
    }
}

impl FromStr for SketchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fd" => Ok(SketchMode::Fd),
            "rfd" => Ok(SketchMode::Rfd),
            other => Err(Error::InvalidSpec(format!("unknown sketch mode `{other}`"))),
        }
    }
}

/// Mutable FD/RFD state. Single writer; clone to fork.
#[derive(Clone, Debug)]
pub struct StreamingSketch {
    buffer: DMatrix<f64>,
    fill: usize,
    rho: f64,
    m: usize,
    d: usize,
    rows_seen: usize,
}

impl StreamingSketch {
    pub fn new(m: usize, d: usize) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidDimension { m, d });
        }
        Ok(Self {
            buffer: DMatrix::zeros(2 * m, d),
            fill: 0,
            rho: 0.0,
            m,
            d,
            rows_seen: 0,
        })
    }

    /// Sketch every row of `source` in order.
    pub fn from_rows<S: RowSource + ?Sized>(source: &S, m: usize) -> Result<Self> {
        let mut sk = Self::new(m, source.n_cols())?;
        sk.extend_from(source);
        Ok(sk)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Occupied buffer rows; rows at or beyond this index are zero.
    pub fn fill(&self) -> usize {
        self.fill
    }

    /// Accumulated shift (half of all removed shrink mass).
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    pub fn buffer(&self) -> &DMatrix<f64> {
        &self.buffer
    }

    pub fn update(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: row.len(),
            });
        }
        self.rows_seen += 1;
        // A zero row written into a zero slot leaves the buffer unchanged.
        if row.iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        for (j, &v) in row.iter().enumerate() {
            self.buffer[(self.fill, j)] = v;
        }
        self.fill += 1;
        if self.fill == 2 * self.m {
            let removed = shrink(&mut self.buffer, self.m, &mut self.fill);
            self.rho += removed / 2.0;
        }
        Ok(())
    }

    pub fn extend_from<S: RowSource + ?Sized>(&mut self, source: &S) {
        assert_eq!(source.n_cols(), self.d, "row source width differs from sketch");
        source.for_each_row(&mut |_, row| {
            self.update(row).expect("width checked above");
        });
    }

    /// Produce the `m × d` summary without consuming the sketch.
    pub fn finalize(&self, mode: SketchMode) -> SketchOutput {
        let mut buf = self.buffer.clone();
        let mut fill = self.fill;
        let mut rho = self.rho;
        if fill > self.m {
            rho += shrink(&mut buf, self.m, &mut fill) / 2.0;
        } else if fill > 0 {
            // Rotate to Σ·Vᵀ form without shrinking so output rows are orthogonal.
            let top = buf.rows(0, fill).into_owned();
            let (s, vt) = svd_values_vt(&top);
            buf.fill(0.0);
            fill = 0;
            for (i, &sv) in s.iter().enumerate() {
                if sv > 0.0 {
                    buf.set_row(i, &(vt.row(i) * sv));
                    fill = i + 1;
                }
            }
        }
        debug_assert!(fill <= self.m);
        let b = buf.rows(0, self.m).into_owned();
        SketchOutput {
            b,
            delta: match mode {
                SketchMode::Fd => 0.0,
                SketchMode::Rfd => rho,
            },
            mode,
        }
    }
}

/// One SVD-and-shrink step on the first `fill` rows of `buf`. Returns the
/// subtracted squared singular value `δ = σ_m²` and updates `fill` to the
/// number of surviving nonzero rows.
fn shrink(buf: &mut DMatrix<f64>, m: usize, fill: &mut usize) -> f64 {
    let active = buf.rows(0, *fill).into_owned();
    let (s, vt) = svd_values_vt(&active);
    let delta = if s.len() >= m { s[m - 1] * s[m - 1] } else { 0.0 };
    let floor = s.first().copied().unwrap_or(0.0) * ZERO_SINGULAR_RTOL;
    buf.fill(0.0);
    let mut kept = 0;
    for (i, &sv) in s.iter().enumerate() {
        if sv <= floor {
            break;
        }
        let shrunk = (sv * sv - delta).max(0.0).sqrt();
        if shrunk <= 0.0 {
            break;
        }
        buf.set_row(i, &(vt.row(i) * shrunk));
        kept = i + 1;
    }
    *fill = kept;
    delta
}

/// Finalized sketch: `B` (`m × d`, mutually orthogonal rows) and shift `δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchOutput {
    pub b: DMatrix<f64>,
    pub delta: f64,
    pub mode: SketchMode,
}

impl SketchOutput {
    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn d(&self) -> usize {
        self.b.ncols()
    }

    /// `BᵀB + δI`, dense.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = self.b.tr_mul(&self.b);
        for i in 0..c.nrows() {
            c[(i, i)] += self.delta;
        }
        c
    }

    /// CSV checkpoint: `# m,d,delta,mode` header, then the values line, then
    /// `m` rows of `d` decimals.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# m,d,delta,mode")?;
        writeln!(w, "{},{},{:.16e},{}", self.m(), self.d(), self.delta, self.mode)?;
        for i in 0..self.m() {
            let line: Vec<String> = self.b.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, reason: String| Error::Parse {
            line: line + 1,
            column: 1,
            reason,
        };
        let (hl, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty sketch file".into()))?;
        if header?.trim() != "# m,d,delta,mode" {
            return Err(parse_err(hl, "missing `# m,d,delta,mode` header".into()));
        }
        let (ml, meta) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing metadata line".into()))?;
        let meta = meta?;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(ml, "metadata needs 4 fields".into()));
        }
        let m: usize = fields[0].parse().map_err(|e| parse_err(ml, format!("m: {e}")))?;
        let d: usize = fields[1].parse().map_err(|e| parse_err(ml, format!("d: {e}")))?;
        let delta: f64 = fields[2]
            .parse()
            .map_err(|e| parse_err(ml, format!("delta: {e}")))?;
        let mode: SketchMode = fields[3].parse()?;
        let mut b = DMatrix::zeros(m, d);
        let mut i = 0;
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if i >= m {
                return Err(parse_err(ln, "more rows than m".into()));
            }
            let vals: Vec<&str> = line.trim().split(',').collect();
            if vals.len() != d {
                return Err(parse_err(ln, format!("expected {d} values, got {}", vals.len())));
            }
            for (j, v) in vals.iter().enumerate() {
                b[(i, j)] = v.parse().map_err(|e| parse_err(ln, format!("value {j}: {e}")))?;
            }
            i += 1;
        }
        if i != m {
            return Err(parse_err(0, format!("expected {m} rows, got {i}")));
        }
        Ok(Self { b, delta, mode })
    }
}

/// Tail mass `Δ_k = ‖A − A_k‖_F²` and `α = 1/(m−k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailMass {
    pub k: usize,
    pub delta_k: f64,
    pub alpha: f64,
}

/// Squared singular values of a materialized matrix; `Δ_k` for every `k`.
#[derive(Clone, Debug)]
pub struct TailSpectrum {
    squared: Vec<f64>,
    /// `suffix[k] = Σ_{i ≥ k} σ_i²`
    suffix: Vec<f64>,
}

impl TailSpectrum {
    pub fn new(a: &DMatrix<f64>) -> Self {
        Self::from_singular_values(&singular_values_desc(a))
    }

    pub fn from_singular_values(s: &[f64]) -> Self {
        let squared: Vec<f64> = s.iter().map(|x| x * x).collect();
        let mut suffix = vec![0.0; squared.len() + 1];
        for i in (0..squared.len()).rev() {
            suffix[i] = suffix[i + 1] + squared[i];
        }
        Self { squared, suffix }
    }

    pub fn rank_limit(&self) -> usize {
        self.squared.len()
    }

    pub fn squared_singular_values(&self) -> &[f64] {
        &self.squared
    }

    pub fn delta(&self, k: usize) -> Result<f64> {
        self.suffix.get(k).copied().ok_or_else(|| Error::RankOutOfRange {
            k,
            constraint: format!("k <= min(n, d) = {}", self.squared.len()),
        })
    }

    pub fn tail_mass(&self, k: usize, m: usize) -> Result<TailMass> {
        let delta_k = self.delta(k)?;
        if k >= m {
            return Err(Error::RankOutOfRange {
                k,
                constraint: format!("k < m = {m}"),
            });
        }
        Ok(TailMass {
            k,
            delta_k,
            alpha: 1.0 / (m - k) as f64,
        })
    }
}

/// `Δ_k` from a dense SVD of `a`, with `α` against budget `m`.
pub fn tail_mass(a: &DMatrix<f64>, k: usize, m: usize) -> Result<TailMass> {
    TailSpectrum::new(a).tail_mass(k, m)
}
