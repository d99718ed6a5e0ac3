//! Small dense kernels shared by the estimator, the oracles and the diagnostics.
//!
//! Everything here works on `nalgebra` dynamic matrices. Problem sizes are
//! desk scale (a few dozen sensors, parameter dimension up to ~16), so no
//! attempt is made at blocking or in-place tricks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Replaces `m` by `(m + mᵀ) / 2`, entry by entry, so the result is exactly symmetric.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
///
/// Returns `None` when the factorization fails. The result is symmetrized.
pub fn spd_inverse(m: &Matrix) -> Option<Matrix> {
    let chol = m.clone().cholesky()?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

/// True when the Cholesky factorization of `m` succeeds.
pub fn is_positive_definite(m: &Matrix) -> bool {
    m.clone().cholesky().is_some()
}

pub fn symmetric_eigenvalues(m: &Matrix) -> Vector {
    SymmetricEigen::new(m.clone()).eigenvalues
}

pub fn lambda_min(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).min()
}

pub fn lambda_max(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).max()
}

/// Smallest eigenvalue together with a unit eigenvector attaining it.
pub fn lambda_min_with_vector(m: &Matrix) -> (f64, Vector) {
    let eig = SymmetricEigen::new(m.clone());
    let (idx, value) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    (value, eig.eigenvectors.column(idx).into_owned())
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// 2-norm condition number, `inf` for singular input.
pub fn condition_number(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// Block diagonal matrix from square blocks.
pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let size: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(size, size);
    let mut offset = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((offset, offset), (k, k)).copy_from(b);
        offset += k;
    }
    out
}

/// `a ⊗ I_m`.
pub fn kron_identity(a: &Matrix, m: usize) -> Matrix {
    a.kronecker(&Matrix::identity(m, m))
}

/// Stacks vectors of equal length into one column.
pub fn stack(vectors: &[Vector]) -> Vector {
    let len: usize = vectors.iter().map(|v| v.len()).sum();
    let mut out = Vector::zeros(len);
    let mut offset = 0;
    for v in vectors {
        out.rows_mut(offset, v.len()).copy_from(v);
        offset += v.len();
    }
    out
}

/// Frobenius-norm relative difference `‖a − b‖ / ‖b‖`, with the denominator
/// floored at `f64::MIN_POSITIVE` so that two zero matrices compare as equal.
pub fn relative_difference(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).norm();
    if diff == 0.0 {
        return 0.0;
    }
    diff / b.norm().max(f64::MIN_POSITIVE)
}

pub fn relative_difference_vec(a: &Vector, b: &Vector) -> f64 {
    let diff = (a - b).norm();
    if diff == 0.0 {
        return 0.0;
    }
    diff / b.norm().max(f64::MIN_POSITIVE)
}

pub fn min_entry(m: &Matrix) -> f64 {
    m.iter().copied().fold(f64::INFINITY, f64::min)
}
