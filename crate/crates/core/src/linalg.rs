//! Dense helpers shared by the sketches, solvers and diagnostics.

use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Extreme eigenvalues (min, max) of a symmetric matrix.
pub fn sym_extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let vals = m.clone().symmetric_eigenvalues();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = sym_extreme_eigenvalues(m);
    lo.abs().max(hi.abs())
}

/// Singular values in decreasing order.
pub fn singular_values_desc(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Thin SVD returning (singular values, Vᵀ) with rows of Vᵀ ordered by
/// decreasing singular value. U is not formed.
pub fn svd_values_vt(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut sorted = DMatrix::zeros(r, a.ncols());
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_row(dst, &vt.row(src));
    }
    (values, sorted)
}

/// `AᵀA + shift·I`.
pub fn shifted_gram(a: &DMatrix<f64>, shift: f64) -> DMatrix<f64> {
    let mut g = a.tr_mul(a);
    for i in 0..g.nrows() {
        g[(i, i)] += shift;
    }
    g
}

/// Solve a symmetric positive definite system, falling back to LU if the
/// Cholesky factorization fails numerically.
pub fn spd_solve(h: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    match h.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => h
            .clone()
            .lu()
            .solve(rhs)
            .unwrap_or_else(|| DVector::from_element(rhs.len(), f64::NAN)),
    }
}

/// Relative difference `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert_eq!(vals.as_slice(), &[5.0, 2.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_sorted_and_reconstructs_gram() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (s, vt) = svd_values_vt(&a);
        assert!(s[0] >= s[1]);
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(s.iter().map(|x| x * x).collect()));
        let gram = vt.transpose() * sigma * &vt;
        assert!((gram - a.tr_mul(&a)).norm() < 1e-10);
    }

    #[test]
    fn spectral_norm_of_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.0]);
        assert!((sym_spectral_norm(&m) - 3.0).abs() < 1e-14);
    }
}
