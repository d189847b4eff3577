//! Randomized sketching matrices: dense Gaussian projection and the sparse
//! Johnson–Lindenstrauss transform (SJLT, `s` stacked CountSketch blocks).
//!
//! Randomness comes from `ChaCha8Rng` seeded with `seed_from_u64(seed)`.
//! The Gaussian sketch draws `S` column by column from stream 0. The SJLT
//! gives block `j` its own stream `j`, so each block is an independent
//! CountSketch regardless of how many blocks there are.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Name of the generator, recorded in experiment output.
pub const RNG_NAME: &str = "ChaCha8Rng(seed_from_u64; gaussian stream 0, sjlt block j -> stream j)";

/// Default SJLT sparsity used by the experiments.
pub const DEFAULT_SJLT_SPARSITY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianSketchSpec {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

impl GaussianSketchSpec {
    pub fn new(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidDimension { m, d: n });
        }
        Ok(Self { m, n, seed })
    }

    /// The dense `m × n` matrix `S = R/√m`, `R_ij ~ N(0,1)`.
    pub fn realize(&self) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let scale = 1.0 / (self.m as f64).sqrt();
        DMatrix::from_iterator(
            self.m,
            self.n,
            (0..self.m * self.n).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            }),
        )
    }

    pub fn apply(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_rows(self.n, a)?;
        Ok(self.realize() * a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SjltSketchSpec {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub seed: u64,
}

impl SjltSketchSpec {
    pub fn new(m: usize, n: usize, s: usize, seed: u64) -> Result<Self> {
        if s == 0 || !m.is_multiple_of(s) {
            return Err(Error::InvalidSparsity { s, m });
        }
        if n == 0 {
            return Err(Error::InvalidDimension { m, d: n });
        }
        Ok(Self { m, n, s, seed })
    }

    fn block_rows(&self) -> usize {
        self.m / self.s
    }

    /// Nonzeros of column `c`, one `(row, value)` per block, for every column
    /// in order. Drives both `apply` and `realize`.
    fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        let width = self.block_rows();
        let value = 1.0 / (self.s as f64).sqrt();
        let mut rngs: Vec<ChaCha8Rng> = (0..self.s)
            .map(|j| {
                let mut r = ChaCha8Rng::seed_from_u64(self.seed);
                r.set_stream(j as u64);
                r
            })
            .collect();
        for c in 0..self.n {
            for (j, rng) in rngs.iter_mut().enumerate() {
                let row = j * width + rng.random_range(0..width);
                let sign = if rng.random_bool(0.5) { value } else { -value };
                f(c, row, sign);
            }
        }
    }

    pub fn realize(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.m, self.n);
        self.for_each_entry(|c, r, v| s[(r, c)] += v);
        s
    }

    /// `SA` accumulated in one pass over the rows of `A`.
    pub fn apply(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_rows(self.n, a)?;
        let d = a.ncols();
        let mut out = DMatrix::zeros(self.m, d);
        self.for_each_entry(|c, r, v| {
            for j in 0..d {
                out[(r, j)] += v * a[(c, j)];
            }
        });
        Ok(out)
    }
}

fn check_rows(n: usize, a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    Ok(())
}

/// Which random sketch to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RandomKind {
    Gaussian,
    Sjlt,
}

impl fmt::Display for RandomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RandomKind::Gaussian => "gauss",
            RandomKind::Sjlt => "sjlt",
        })
    }
}

impl FromStr for RandomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss" | "gaussian" => Ok(RandomKind::Gaussian),
            "sjlt" => Ok(RandomKind::Sjlt),
            other => Err(Error::InvalidSpec(format!("unknown random sketch `{other}`"))),
        }
    }
}

/// A fully specified random sketch of either kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomSketch {
    Gaussian(GaussianSketchSpec),
    Sjlt(SjltSketchSpec),
}

impl RandomSketch {
    /// `s` is ignored for the Gaussian sketch.
    pub fn new(kind: RandomKind, m: usize, n: usize, s: usize, seed: u64) -> Result<Self> {
        Ok(match kind {
            RandomKind::Gaussian => RandomSketch::Gaussian(GaussianSketchSpec::new(m, n, seed)?),
            RandomKind::Sjlt => RandomSketch::Sjlt(SjltSketchSpec::new(m, n, s, seed)?),
        })
    }

    pub fn realize(&self) -> DMatrix<f64> {
        match self {
            RandomSketch::Gaussian(g) => g.realize(),
            RandomSketch::Sjlt(s) => s.realize(),
        }
    }

    pub fn apply(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            RandomSketch::Gaussian(g) => g.apply(a),
            RandomSketch::Sjlt(s) => s.apply(a),
        }
    }
}

/// Mix a base seed with up to three indices (splitmix64 finalizer), for
/// deriving independent per-trial / per-iteration seeds.
pub fn derive_seed(base: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = base;
    for part in [a, b, c] {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(part.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_gives_zero_sketch() {
        let a = DMatrix::zeros(20, 3);
        let g = GaussianSketchSpec::new(8, 20, 1).unwrap();
        assert!(g.apply(&a).unwrap().iter().all(|&v| v == 0.0));
        let s = SjltSketchSpec::new(8, 20, 2, 1).unwrap();
        assert!(s.apply(&a).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = DMatrix::from_fn(30, 4, |i, j| (i * 3 + j) as f64 * 0.1);
        let g = GaussianSketchSpec::new(6, 30, 9).unwrap();
        assert_eq!(g.apply(&a).unwrap(), g.apply(&a).unwrap());
        let s = SjltSketchSpec::new(6, 30, 3, 9).unwrap();
        assert_eq!(s.apply(&a).unwrap(), s.apply(&a).unwrap());
        let other = SjltSketchSpec::new(6, 30, 3, 10).unwrap();
        assert_ne!(s.apply(&a).unwrap(), other.apply(&a).unwrap());
    }

    #[test]
    fn sjlt_column_structure() {
        let spec = SjltSketchSpec::new(12, 40, 4, 3).unwrap();
        let s = spec.realize();
        let v = 0.5; // 1/√4
        for c in 0..40 {
            // One nonzero per block of 3 rows.
            for block in 0..4 {
                let nz: Vec<f64> = (block * 3..block * 3 + 3)
                    .map(|r| s[(r, c)])
                    .filter(|&x| x != 0.0)
                    .collect();
                assert_eq!(nz.len(), 1);
                assert!((nz[0].abs() - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sjlt_apply_matches_realized_product() {
        let a = DMatrix::from_fn(25, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let spec = SjltSketchSpec::new(10, 25, 5, 17).unwrap();
        let diff = spec.apply(&a).unwrap() - spec.realize() * &a;
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn sjlt_rejects_bad_sparsity() {
        assert!(matches!(
            SjltSketchSpec::new(10, 5, 3, 0),
            Err(Error::InvalidSparsity { s: 3, m: 10 })
        ));
        assert!(matches!(SjltSketchSpec::new(10, 5, 0, 0), Err(Error::InvalidSparsity { .. })));
    }

    #[test]
    fn wrong_row_count_rejected() {
        let a = DMatrix::zeros(9, 2);
        let g = GaussianSketchSpec::new(4, 10, 0).unwrap();
        assert!(matches!(g.apply(&a), Err(Error::DimensionMismatch { expected: 10, got: 9 })));
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> =
            (0..100).map(|t| derive_seed(42, 1, t, 0)).collect();
        assert_eq!(s.len(), 100);
        assert_eq!(derive_seed(1, 2, 3, 4), derive_seed(1, 2, 3, 4));
    }
}
