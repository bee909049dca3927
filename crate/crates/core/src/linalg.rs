//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Operator 2-norm (largest singular value).
pub fn op_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// `‖P² − P‖₂`.
pub fn idempotency_defect(p: &Matrix) -> f64 {
    op_norm(&(p * p - p))
}

/// Orthonormal basis of the column span of `m` (thin QR). Columns are
/// assumed linearly independent.
pub fn orthonormalize(m: &Matrix) -> Matrix {
    if m.ncols() == 0 {
        return Matrix::zeros(m.nrows(), 0);
    }
    m.clone().qr().q()
}

/// Orthonormal basis of the orthogonal complement of the span of `basis`
/// (which must already be orthonormal).
pub fn orthogonal_complement(basis: &Matrix) -> Matrix {
    let n = basis.nrows();
    let k = basis.ncols();
    if k == 0 {
        return Matrix::identity(n, n);
    }
    let proj = Matrix::identity(n, n) - basis * basis.transpose();
    spectral_basis(&proj, n - k)
}

/// Orthonormal eigenvectors of the symmetric part of `m` belonging to its
/// `count` largest eigenvalues.
pub fn spectral_basis(m: &Matrix, count: usize) -> Matrix {
    let n = m.nrows();
    if count == 0 {
        return Matrix::zeros(n, 0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Matrix::zeros(n, count);
    for (c, &i) in order.iter().take(count).enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

/// Rank of a projector, read off its trace.
pub fn projector_rank(p: &Matrix) -> usize {
    p.trace().round().max(0.0) as usize
}

/// Orthogonal projector onto the span of an orthonormal basis.
pub fn orthogonal_projector(basis: &Matrix) -> Matrix {
    basis * basis.transpose()
}

/// Orthonormal basis of the range of a (possibly oblique) projector.
pub fn range_basis(p: &Matrix) -> Matrix {
    let k = projector_rank(p);
    if k == 0 {
        return Matrix::zeros(p.nrows(), 0);
    }
    let svd = p.clone().svd(true, false);
    let u = svd.u.expect("svd u");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = Matrix::zeros(p.nrows(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        out.set_column(c, &u.column(i));
    }
    out
}

/// Orthonormal basis of the kernel of a projector (= range of `I − P`).
pub fn kernel_basis(p: &Matrix) -> Matrix {
    let n = p.nrows();
    range_basis(&(Matrix::identity(n, n) - p))
}

/// Projector with the given range along the given kernel. Returns `None`
/// when the two subspaces fail to span the whole space.
pub fn projector_from_subspaces(range: &Matrix, kernel: &Matrix) -> Option<Matrix> {
    let n = range.nrows();
    let k = range.ncols();
    debug_assert_eq!(k + kernel.ncols(), n);
    if k == 0 {
        return Some(Matrix::zeros(n, n));
    }
    if k == n {
        return Some(Matrix::identity(n, n));
    }
    let mut basis = Matrix::zeros(n, n);
    basis.columns_mut(0, k).copy_from(range);
    basis.columns_mut(k, n - k).copy_from(kernel);
    let svd = basis.clone().svd(false, false);
    let smin = svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if smin < 1e-10 {
        return None;
    }
    let inv = basis.try_inverse()?;
    Some(range * inv.rows(0, k))
}

/// Max-abs entry of a matrix; used for exact-algebra residuals.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serde adapter: matrices as row-major nested arrays.
pub mod rows {
    use super::{matrix_from_rows, matrix_to_rows, Matrix};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let w = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != w) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(matrix_from_rows(&rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oblique_projector_from_subspaces() {
        let range = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let kernel = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let p = projector_from_subspaces(&range, &kernel).unwrap();
        assert!(idempotency_defect(&p) < 1e-14);
        assert!((&p * &kernel).norm() < 1e-14);
        assert!((&p * &range - &range).norm() < 1e-14);
        assert!(projector_from_subspaces(&range, &range).is_none());
    }

    #[test]
    fn complement_and_bases() {
        let b = orthonormalize(&Matrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]));
        let c = orthogonal_complement(&b);
        assert_eq!(c.ncols(), 2);
        assert!((b.transpose() * &c).norm() < 1e-14);
        let p = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0, 1.0]));
        assert_eq!(projector_rank(&p), 2);
        assert_eq!(range_basis(&p).ncols(), 2);
        assert_eq!(kernel_basis(&p).ncols(), 1);
        assert!((op_norm(&Matrix::from_diagonal(&Vector::from_vec(vec![3.0, -4.0]))) - 4.0).abs() < 1e-14);
    }
}
