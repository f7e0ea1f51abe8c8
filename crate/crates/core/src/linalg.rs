//! Small dense linear-algebra helpers shared by the manifold and GP code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; column `i` of the returned matrix pairs with value `i`.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mapped = eig.eigenvalues.map(f);
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&mapped) * v.transpose()))
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::exp)
}

/// Matrix logarithm of a symmetric positive definite matrix. The caller is
/// responsible for checking positivity.
pub fn spd_log(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::ln)
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Thin QR orthonormalization of the columns of `m` (n×p, p ≤ n).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Number of free coordinates of a q×q symmetric matrix.
pub fn sym_dim(q: usize) -> usize {
    q * (q + 1) / 2
}

/// Flattens a symmetric matrix into `q(q+1)/2` coordinates, diagonal first,
/// then the upper triangle row by row scaled by √2. The Euclidean dot product
/// of two flattened matrices equals their Frobenius inner product.
pub fn flatten_sym(m: &DMatrix<f64>) -> DVector<f64> {
    let q = m.nrows();
    let mut out = Vec::with_capacity(sym_dim(q));
    out.extend((0..q).map(|i| m[(i, i)]));
    for i in 0..q {
        for j in (i + 1)..q {
            out.push(std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`flatten_sym`].
pub fn unflatten_sym(q: usize, flat: &DVector<f64>) -> DMatrix<f64> {
    debug_assert_eq!(flat.len(), sym_dim(q));
    let mut m = DMatrix::zeros(q, q);
    for i in 0..q {
        m[(i, i)] = flat[i];
    }
    let mut k = q;
    for i in 0..q {
        for j in (i + 1)..q {
            let v = flat[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = v;
            m[(j, i)] = v;
            k += 1;
        }
    }
    m
}
