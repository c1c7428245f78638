//! Dense double-precision matrices and thin/truncated singular value
//! decomposition.
//!
//! The factorization X = U·diag(s)·Vᵀ is computed by diagonalizing the Gram
//! matrix XᵀX with cyclic Jacobi rotations. After one-hot encoding the
//! feature dimension stays near 122, so the p×p eigenproblem is small and
//! Jacobi keeps near machine-precision accuracy.

use thiserror::Error;

/// Singular values below `RANK_TOL * sigma_max` are treated as zero and
/// dropped from the thin factorization.
const RANK_TOL: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFiniteInput { row: usize, col: usize },
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("rank {k} outside valid range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Row-major dense matrix of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting shape mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch { rows, cols, len: data.len() });
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NonFiniteInput { row: i / cols.max(1), col: i % cols.max(1) });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch { expected: self.cols, found: rhs.rows });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let lhs_row = self.row(r);
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &lv) in lhs_row.iter().enumerate() {
                if lv == 0.0 {
                    continue;
                }
                let rhs_row = rhs.row(k);
                for (o, &rv) in out_row.iter_mut().zip(rhs_row) {
                    *o += lv * rv;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Gram matrix AᵀA (cols × cols), filled symmetrically.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..p {
                let vi = row[i];
                if vi == 0.0 {
                    continue;
                }
                for j in i..p {
                    g.data[i * p + j] += vi * row[j];
                }
            }
        }
        for i in 0..p {
            for j in i + 1..p {
                g.data[j * p + i] = g.data[i * p + j];
            }
        }
        g
    }
}

/// Thin SVD: `x ≈ u · diag(singular_values) · vᵀ` with singular values in
/// non-increasing order. Columns for singular values at numerical zero are
/// omitted, so `u` and `v` carry one column per retained value.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl ThinSvd {
    /// Keeps the `k` largest singular values and the matching columns of `v`.
    pub fn truncate(&self, k: usize) -> Result<SvdModel, LinalgError> {
        if k < 1 || k > self.singular_values.len() {
            return Err(LinalgError::RankOutOfRange { k, max: self.singular_values.len() });
        }
        let p = self.v.rows();
        let mut v_k = Matrix::zeros(p, k);
        for r in 0..p {
            for c in 0..k {
                v_k.set(r, c, self.v.get(r, c));
            }
        }
        Ok(SvdModel { v_k, singular_values: self.singular_values[..k].to_vec() })
    }
}

/// Retained right-singular basis used to project records into `k` dimensions.
#[derive(Debug, Clone)]
pub struct SvdModel {
    v_k: Matrix,
    singular_values: Vec<f64>,
}

impl SvdModel {
    /// Rebuilds a model from its parts, validating the invariants (orthonormal
    /// basis columns, non-increasing non-negative singular values). Used when
    /// deserializing model files.
    pub fn new(v_k: Matrix, singular_values: Vec<f64>) -> Result<Self, LinalgError> {
        let k = singular_values.len();
        if k < 1 || v_k.cols() != k || v_k.rows() < k {
            return Err(LinalgError::RankOutOfRange { k, max: v_k.rows() });
        }
        for w in singular_values.windows(2) {
            if w[1] > w[0] {
                return Err(LinalgError::RankOutOfRange { k, max: v_k.rows() });
            }
        }
        if singular_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(LinalgError::NonFiniteInput { row: 0, col: 0 });
        }
        for i in 0..k {
            for j in i..k {
                let mut dot = 0.0;
                for r in 0..v_k.rows() {
                    dot += v_k.get(r, i) * v_k.get(r, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-10 {
                    return Err(LinalgError::NonFiniteInput { row: i, col: j });
                }
            }
        }
        Ok(Self { v_k, singular_values })
    }

    /// Retained rank.
    pub fn k(&self) -> usize {
        self.singular_values.len()
    }

    /// Original feature dimension.
    pub fn p(&self) -> usize {
        self.v_k.rows()
    }

    pub fn v_k(&self) -> &Matrix {
        &self.v_k
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Projects `x` (n×p) onto the retained basis, yielding an n×k matrix.
    pub fn project(&self, x: &Matrix) -> Result<Matrix, LinalgError> {
        if x.cols() != self.p() {
            return Err(LinalgError::DimensionMismatch { expected: self.p(), found: x.cols() });
        }
        x.matmul(&self.v_k)
    }

    /// Projects a single row vector.
    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if row.len() != self.p() {
            return Err(LinalgError::DimensionMismatch { expected: self.p(), found: row.len() });
        }
        let k = self.k();
        let mut out = vec![0.0; k];
        for (i, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o += v * self.v_k.get(i, c);
            }
        }
        Ok(out)
    }

    /// Frobenius norm of `x − (x·v_k)·v_kᵀ`.
    pub fn reconstruction_error(&self, x: &Matrix) -> Result<f64, LinalgError> {
        let projected = self.project(x)?;
        let recon = projected.matmul(&self.v_k.transpose())?;
        let mut sum = 0.0;
        for (a, b) in x.data.iter().zip(recon.data.iter()) {
            let d = a - b;
            sum += d * d;
        }
        Ok(sum.sqrt())
    }
}

/// Thin SVD of `x` via Jacobi diagonalization of XᵀX.
///
/// Returned singular values are non-increasing; each right-singular vector is
/// sign-fixed so its largest-magnitude entry is positive, which keeps
/// factorizations reproducible across runs and platforms.
pub fn svd_thin(x: &Matrix) -> Result<ThinSvd, LinalgError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(LinalgError::EmptyMatrix);
    }
    for r in 0..x.rows() {
        for (c, v) in x.row(r).iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NonFiniteInput { row: r, col: c });
            }
        }
    }

    let gram = x.gram();
    let (eigvals, eigvecs) = jacobi_eigh(&gram)?;

    let p = x.cols();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eigvals[b].total_cmp(&eigvals[a]).then(a.cmp(&b)));

    let sigmas: Vec<f64> = order.iter().map(|&j| eigvals[j].max(0.0).sqrt()).collect();
    let sigma_max = sigmas.first().copied().unwrap_or(0.0);
    let rank = sigmas.iter().take_while(|&&s| s > RANK_TOL * sigma_max && s > 0.0).count();

    let mut v = Matrix::zeros(p, rank);
    for (c, &j) in order.iter().take(rank).enumerate() {
        let mut col: Vec<f64> = (0..p).map(|r| eigvecs.get(r, j)).collect();
        let pivot = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, &val)| val)
            .unwrap_or(1.0);
        if pivot < 0.0 {
            for val in &mut col {
                *val = -*val;
            }
        }
        for (r, val) in col.iter().enumerate() {
            v.set(r, c, *val);
        }
    }

    let mut u = Matrix::zeros(x.rows(), rank);
    for c in 0..rank {
        let inv_sigma = 1.0 / sigmas[c];
        for r in 0..x.rows() {
            let mut dot = 0.0;
            let row = x.row(r);
            for (i, &xv) in row.iter().enumerate() {
                dot += xv * v.get(i, c);
            }
            u.set(r, c, dot * inv_sigma);
        }
    }

    Ok(ThinSvd { u, singular_values: sigmas[..rank].to_vec(), v })
}

/// Cyclic Jacobi diagonalization of a symmetric matrix. Returns unsorted
/// eigenvalues and the matching eigenvector columns.
fn jacobi_eigh(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    if n == 1 {
        return Ok((vec![m.get(0, 0)], v));
    }

    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    let tol = 1e-14 * scale;

    for sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off_sq = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                let e = m.get(p, q);
                off_sq += e * e;
            }
        }
        if off_sq.sqrt() <= tol {
            let eig = (0..n).map(|i| m.get(i, i)).collect();
            return Ok((eig, v));
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // Negligible off-diagonal elements are zeroed outright after
                // the first sweeps (standard Jacobi small-element cutoff).
                if sweep > 3 && apq.abs() <= f64::EPSILON * (app.abs() + aqq.abs()) {
                    m.set(p, q, 0.0);
                    m.set(q, p, 0.0);
                    continue;
                }

                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e154 {
                    1.0 / (2.0 * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = m.get(i, p);
                    let aiq = m.get(i, q);
                    m.set(i, p, aip - s * (aiq + tau * aip));
                    m.set(p, i, m.get(i, p));
                    m.set(i, q, aiq + s * (aip - tau * aiq));
                    m.set(q, i, m.get(i, q));
                }
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip - s * (viq + tau * vip));
                    v.set(i, q, viq + s * (vip - tau * viq));
                }
            }
        }
    }
    Err(LinalgError::NoConvergence(MAX_JACOBI_SWEEPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = svd_thin(&Matrix::identity(3)).unwrap();
        assert_eq!(svd.singular_values.len(), 3);
        for s in &svd.singular_values {
            assert!(close(*s, 1.0, 1e-12));
        }
    }

    #[test]
    fn diagonal_matrix_singular_values() {
        let x = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 2.0]).unwrap();
        let svd = svd_thin(&x).unwrap();
        assert!(close(svd.singular_values[0], 3.0, 1e-12));
        assert!(close(svd.singular_values[1], 2.0, 1e-12));
    }

    #[test]
    fn truncate_full_rank_is_identity() {
        let x = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 2.0]).unwrap();
        let svd = svd_thin(&x).unwrap();
        let model = svd.truncate(2).unwrap();
        assert_eq!(model.singular_values(), svd.singular_values.as_slice());
        assert_eq!(model.v_k(), &svd.v);
    }

    #[test]
    fn truncate_keeps_largest() {
        let x = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 2.0]).unwrap();
        let model = svd_thin(&x).unwrap().truncate(1).unwrap();
        assert_eq!(model.k(), 1);
        assert!(close(model.singular_values()[0], 3.0, 1e-12));
    }

    #[test]
    fn truncate_rank_zero_rejected() {
        let svd = svd_thin(&Matrix::identity(2)).unwrap();
        assert!(matches!(svd.truncate(0), Err(LinalgError::RankOutOfRange { .. })));
        assert!(matches!(svd.truncate(3), Err(LinalgError::RankOutOfRange { .. })));
    }

    #[test]
    fn project_rejects_wrong_width() {
        let model = svd_thin(&Matrix::identity(3)).unwrap().truncate(2).unwrap();
        let x = Matrix::zeros(1, 4);
        assert!(matches!(model.project(&x), Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn full_rank_reconstruction_error_is_zero() {
        let x = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let svd = svd_thin(&x).unwrap();
        let model = svd.truncate(svd.singular_values.len()).unwrap();
        assert!(model.reconstruction_error(&x).unwrap() <= 1e-8 * x.frobenius_norm());
    }

    #[test]
    fn dropped_sigma_is_the_reconstruction_error() {
        let x = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 2.0]).unwrap();
        let model = svd_thin(&x).unwrap().truncate(1).unwrap();
        assert!(close(model.reconstruction_error(&x).unwrap(), 2.0, 1e-8));
    }

    #[test]
    fn zero_input_has_zero_reconstruction_error() {
        let basis = svd_thin(&Matrix::identity(3)).unwrap().truncate(2).unwrap();
        let zero = Matrix::zeros(4, 3);
        assert_eq!(basis.reconstruction_error(&zero).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(matches!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFiniteInput { .. })
        ));
        let mut x = Matrix::zeros(2, 2);
        x.set(0, 1, f64::INFINITY);
        assert!(matches!(svd_thin(&x), Err(LinalgError::NonFiniteInput { .. })));
    }

    #[test]
    fn zero_matrix_yields_empty_thin_factorization() {
        let svd = svd_thin(&Matrix::zeros(3, 2)).unwrap();
        assert!(svd.singular_values.is_empty());
        assert_eq!(svd.v.cols(), 0);
    }

    #[test]
    fn model_rebuild_validates_orthonormality() {
        let v = Matrix::from_vec(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(SvdModel::new(v, vec![2.0, 1.0]).is_err());
        let good = Matrix::identity(2);
        assert!(SvdModel::new(good, vec![2.0, 1.0]).is_ok());
    }
}
