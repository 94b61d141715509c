//! Dense column-major matrices and the kernels every other module builds on:
//! GEMM, symmetric eigendecomposition, Cholesky solves, eigSVD and QR.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut, Range};

use thiserror::Error;

use crate::fmath;

mod chol;
mod eig;
mod gemm;
mod qr;

pub use chol::{chol_solve, trace_of_product_solve, Cholesky, PIVOT_TOL};
pub use eig::{eig_svd, eig_svd_with_tol, jacobi_eig, sym_eig, EigSvdResult, SymEigResult, EIG_TOL};
pub use gemm::{gemm, matmul, matmul_nt, matmul_tn, set_threads, threads, Transpose};
pub use qr::{orthonormalize, HouseholderQr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("data length {len} does not match {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("rank deficient: pivot {index} has relative size {ratio:e}")]
    RankDeficient { index: usize, ratio: f64 },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Real matrix of `f64` stored column by column.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Square diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Wraps column-major data, rejecting a wrong length or non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos % rows.max(1),
                col: pos / rows.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from row-major data, mostly for literals in tests.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        let m = Self::from_fn(rows, cols, |i, j| data[i * cols + j]);
        Self::from_col_major(rows, cols, m.data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for (i, &v) in self.col(j).iter().enumerate() {
                t.data[i * self.cols + j] = v;
            }
        }
        t
    }

    /// Copy of the column range `range`.
    pub fn columns(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.cols, "column range out of bounds");
        Self {
            rows: self.rows,
            cols: range.len(),
            data: self.data[range.start * self.rows..range.end * self.rows].to_vec(),
        }
    }

    /// Copy of the leading `rows x cols` block.
    pub fn top_left(&self, rows: usize, cols: usize) -> Self {
        assert!(rows <= self.rows && cols <= self.cols);
        Self::from_fn(rows, cols, |i, j| self[(i, j)])
    }

    /// Appends the columns of `other`; an empty matrix adopts its row count.
    pub fn append_cols(&mut self, other: &DenseMatrix) -> Result<(), LinalgError> {
        if self.cols == 0 && self.data.is_empty() {
            self.rows = other.rows;
        }
        if other.rows != self.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "append_cols",
                left: self.shape(),
                right: other.shape(),
            });
        }
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
        Ok(())
    }

    /// Keeps only the columns whose indices are listed, in that order.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Multiplies column `j` by `s[j]`, i.e. `self * diag(s)`.
    pub fn scale_cols(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.cols);
        for (j, &sj) in s.iter().enumerate() {
            self.col_mut(j).iter_mut().for_each(|v| *v *= sj);
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) -> Result<(), LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                op: "axpy",
                left: self.shape(),
                right: other.shape(),
            });
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn frob_norm_sq(&self) -> f64 {
        frob_norm_sq(self)
    }

    pub fn frob_norm(&self) -> f64 {
        fmath::sqrt(frob_norm_sq(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(fmath::abs(*v)))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for i in (j + 1)..self.rows {
                worst = worst.max(fmath::abs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst
    }

    /// Replaces the matrix by `(m + mᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (self.data[j * n + i] + self.data[i * n + j]);
                self.data[j * n + i] = v;
                self.data[i * n + j] = v;
            }
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{}", self.rows, self.cols)?;
        if self.rows * self.cols > 64 {
            return Ok(());
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                write!(f, " {:>12.5e}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Sum of squared entries.
pub fn frob_norm_sq(m: &DenseMatrix) -> f64 {
    m.data.iter().map(|v| v * v).sum()
}

/// `max_ij |aᵀa - I|_ij`, the orthonormality defect of the columns of `a`.
pub fn orthonormality_defect(a: &DenseMatrix) -> f64 {
    let g = matmul_tn(a, a).expect("aᵀa always conforms");
    let mut worst: f64 = 0.0;
    for j in 0..g.cols() {
        for i in 0..g.rows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max(fmath::abs(g[(i, j)] - target));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_literal_is_transposed_into_columns() {
        let m = DenseMatrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.col(0), &[1.0, 4.0]);
        assert_eq!(m[(1, 2)], 6.0);
        assert_eq!(m.transpose()[(2, 1)], 6.0);
    }

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(matches!(
            DenseMatrix::from_col_major(2, 2, vec![1.0; 3]),
            Err(LinalgError::BadLength { .. })
        ));
        assert!(matches!(
            DenseMatrix::from_col_major(2, 2, vec![1.0, f64::NAN, 0.0, 0.0]),
            Err(LinalgError::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn append_to_empty_adopts_rows() {
        let mut m = DenseMatrix::zeros(0, 0);
        m.append_cols(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(m.shape(), (3, 3));
        assert!(m.append_cols(&DenseMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn frobenius_of_known_matrix() {
        let m = DenseMatrix::from_row_major(2, 2, &[1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(frob_norm_sq(&m), 30.0);
    }
}
