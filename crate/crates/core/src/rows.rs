//! Row-stream access to a data matrix.
//!
//! Streaming algorithms only ever see one row at a time; a source must allow
//! any number of sequential passes.

use nalgebra::{DMatrix, DVector};

pub trait RowSource {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;

    /// One sequential pass over the rows, in order.
    fn for_each_row(&self, f: &mut dyn FnMut(usize, &[f64]));

    /// `A x` via one pass.
    fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_rows());
        self.for_each_row(&mut |i, row| {
            out[i] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        });
        out
    }

    /// `Aᵀ r` via one pass.
    fn tr_mul_vec(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_cols());
        self.for_each_row(&mut |i, row| {
            let w = r[i];
            if w != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += w * a;
                }
            }
        });
        out
    }

    /// `AᵀA`, dense. Only for exact/oracle paths.
    fn gram(&self) -> DMatrix<f64> {
        let d = self.n_cols();
        let mut g = DMatrix::zeros(d, d);
        self.for_each_row(&mut |_, row| {
            for j in 0..d {
                let rj = row[j];
                if rj == 0.0 {
                    continue;
                }
                for i in 0..d {
                    g[(i, j)] += row[i] * rj;
                }
            }
        });
        g
    }
}

impl RowSource for DMatrix<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn for_each_row(&self, f: &mut dyn FnMut(usize, &[f64])) {
        let mut buf = vec![0.0; self.ncols()];
        for i in 0..self.nrows() {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = self[(i, j)];
            }
            f(i, &buf);
        }
    }

    fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }

    fn tr_mul_vec(&self, r: &DVector<f64>) -> DVector<f64> {
        self.tr_mul(r)
    }

    fn gram(&self) -> DMatrix<f64> {
        self.tr_mul(self)
    }
}
