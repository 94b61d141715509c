//! Random test matrices and sparse-aware products.
//!
//! Column `c` of block `block_id` is always drawn from the stream
//! `(seed, block_id, c)`, so a block is reproducible in isolation.

use alloc::vec::Vec;

use crate::fmath;
use crate::matrix::{DenseMatrix, LinalgError};
use crate::rng::{gaussian_matrix, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SketchKind {
    Gaussian,
    Bernoulli,
    StdBernoulli,
    SparseSign,
    SparseGaussian,
}

impl SketchKind {
    pub const ALL: [SketchKind; 5] = [
        SketchKind::Gaussian,
        SketchKind::StdBernoulli,
        SketchKind::SparseSign,
        SketchKind::SparseGaussian,
        SketchKind::Bernoulli,
    ];

    pub fn is_sparse(self) -> bool {
        self != SketchKind::Gaussian
    }

    /// Short label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::Bernoulli => "bernoulli",
            SketchKind::StdBernoulli => "std-bernoulli",
            SketchKind::SparseSign => "sparse-sign",
            SketchKind::SparseGaussian => "sparse-gaussian",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Default density: `max(1e-3, ln N / N)` for the standardized Bernoulli
    /// kind and `max(1e-3, 10 / N)` for the other sparse kinds, `N = max(m, n)`.
    pub fn default_p(self, m: usize, n: usize) -> f64 {
        let big = m.max(n).max(2) as f64;
        let p = match self {
            SketchKind::Gaussian => return 1.0,
            SketchKind::StdBernoulli => fmath::ln(big) / big,
            _ => 10.0 / big,
        };
        p.clamp(1e-3, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SketchError {
    #[error("density p = {p} must lie strictly between 0 and 1")]
    InvalidProbability { p: f64 },
    #[error("sketch shape {rows}x{cols} must be non-empty")]
    EmptyShape { rows: usize, cols: usize },
}

/// Sketch kind, density and seed. `p` is ignored for `Gaussian`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchSpec {
    pub kind: SketchKind,
    pub p: f64,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(kind: SketchKind, p: f64, seed: u64) -> Result<Self, SketchError> {
        let spec = Self { kind, p, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(seed: u64) -> Self {
        Self {
            kind: SketchKind::Gaussian,
            p: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SketchError> {
        if self.kind.is_sparse() && !(self.p > 0.0 && self.p < 1.0) {
            return Err(SketchError::InvalidProbability { p: self.p });
        }
        Ok(())
    }

    /// Scale `√(p(1−p))` relating `B − p` to the standardized matrix.
    pub fn std_scale(&self) -> f64 {
        fmath::sqrt(self.p * (1.0 - self.p))
    }

    /// Draws the nonzero pattern and values of one column of length `n`.
    /// For `StdBernoulli` the values are the raw Bernoulli ones.
    ///
    /// Panics for the dense `Gaussian` kind.
    pub fn sparse_column(&self, n: usize, block_id: u64, col: u64, rows: &mut Vec<u32>, vals: &mut Vec<f64>) {
        assert!(self.kind.is_sparse(), "dense kind has no sparse column");
        let mut s = Stream::new(self.seed, block_id, col);
        let ln_q = fmath::log1p(-self.p);
        let inv_sqrt_p = 1.0 / fmath::sqrt(self.p);
        let mut next = s.geometric_gap(ln_q);
        while next < n as u64 {
            rows.push(next as u32);
            vals.push(match self.kind {
                SketchKind::Bernoulli | SketchKind::StdBernoulli => 1.0,
                SketchKind::SparseSign => {
                    if s.next_u64() >> 63 == 0 {
                        inv_sqrt_p
                    } else {
                        -inv_sqrt_p
                    }
                }
                SketchKind::SparseGaussian => {
                    let mut g = s.normal();
                    while g == 0.0 {
                        g = s.normal();
                    }
                    g * inv_sqrt_p
                }
                SketchKind::Gaussian => unreachable!(),
            });
            next = next.saturating_add(1).saturating_add(s.geometric_gap(ln_q));
        }
    }
}

/// Compressed sparse-column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSketch {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseSketch {
    /// Builds from CSC arrays, checking the structural invariants.
    pub fn from_csc(
        rows: usize,
        cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        let bad = LinalgError::BadLength {
            rows,
            cols,
            len: values.len(),
        };
        if col_ptr.len() != cols + 1 || col_ptr[0] != 0 || col_ptr[cols] != values.len() || row_idx.len() != values.len() {
            return Err(bad);
        }
        for c in 0..cols {
            if col_ptr[c] > col_ptr[c + 1] {
                return Err(bad);
            }
            let r = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            if r.windows(2).any(|w| w[0] >= w[1]) || r.last().is_some_and(|&x| x as usize >= rows) {
                return Err(bad);
            }
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite() || *v == 0.0) {
            let c = col_ptr.partition_point(|&p| p <= k) - 1;
            return Err(LinalgError::NonFinite {
                row: row_idx[k] as usize,
                col: c,
            });
        }
        Ok(Self {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Sparse identity of size `n`.
    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n as u32).collect(),
            values: alloc::vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[u32] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(rows, values)` of column `c`.
    pub fn column(&self, c: usize) -> (&[u32], &[f64]) {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for c in 0..self.cols {
            let (r, v) = self.column(c);
            let col = d.col_mut(c);
            for (&i, &x) in r.iter().zip(v) {
                col[i as usize] = x;
            }
        }
        d
    }
}

/// One generated block of a test matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SketchBlock {
    Dense(DenseMatrix),
    Sparse(SparseSketch),
    /// Standardized Bernoulli block held as its 0/1 pattern `B`; the block
    /// itself is `(B − p)/√(p(1−p))`.
    Centered { pattern: SparseSketch, p: f64 },
}

impl SketchBlock {
    pub fn rows(&self) -> usize {
        match self {
            SketchBlock::Dense(d) => d.rows(),
            SketchBlock::Sparse(s) | SketchBlock::Centered { pattern: s, .. } => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            SketchBlock::Dense(d) => d.cols(),
            SketchBlock::Sparse(s) | SketchBlock::Centered { pattern: s, .. } => s.cols(),
        }
    }

    /// Stored nonzeros (`rows·cols` for dense blocks).
    pub fn nnz(&self) -> usize {
        match self {
            SketchBlock::Dense(d) => d.rows() * d.cols(),
            SketchBlock::Sparse(s) | SketchBlock::Centered { pattern: s, .. } => s.nnz(),
        }
    }

    /// The block as a dense matrix, standardized for `Centered`.
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            SketchBlock::Dense(d) => d.clone(),
            SketchBlock::Sparse(s) => s.to_dense(),
            SketchBlock::Centered { pattern, p } => {
                let scale = 1.0 / fmath::sqrt(p * (1.0 - p));
                let mut d = pattern.to_dense();
                d.as_mut_slice().iter_mut().for_each(|x| *x = (*x - p) * scale);
                d
            }
        }
    }
}

/// Generates the `n x l` block `block_id` of the test matrix described by `spec`.
pub fn gen_sketch(spec: &SketchSpec, n: usize, l: usize, block_id: u64) -> Result<SketchBlock, SketchError> {
    spec.validate()?;
    if n == 0 || l == 0 {
        return Err(SketchError::EmptyShape { rows: n, cols: l });
    }
    if spec.kind == SketchKind::Gaussian {
        return Ok(SketchBlock::Dense(gaussian_matrix(n, l, spec.seed, block_id)));
    }
    let expect = ((n * l) as f64 * spec.p * 1.1) as usize + 16;
    let mut col_ptr = Vec::with_capacity(l + 1);
    let mut row_idx = Vec::with_capacity(expect);
    let mut values = Vec::with_capacity(expect);
    col_ptr.push(0);
    for c in 0..l {
        spec.sparse_column(n, block_id, c as u64, &mut row_idx, &mut values);
        col_ptr.push(values.len());
    }
    let s = SparseSketch {
        rows: n,
        cols: l,
        col_ptr,
        row_idx,
        values,
    };
    Ok(match spec.kind {
        SketchKind::StdBernoulli => SketchBlock::Centered { pattern: s, p: spec.p },
        _ => SketchBlock::Sparse(s),
    })
}

fn check(op: &'static str, ok: bool, left: (usize, usize), right: (usize, usize)) -> Result<(), LinalgError> {
    if ok {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { op, left, right })
    }
}

/// `a · s` in `O(nnz(s) · m)`.
pub fn sparse_dense_mul(a: &DenseMatrix, s: &SparseSketch) -> Result<DenseMatrix, LinalgError> {
    check("sparse_dense_mul", a.cols() == s.rows, a.shape(), (s.rows, s.cols))?;
    let mut out = DenseMatrix::zeros(a.rows(), s.cols);
    for c in 0..s.cols {
        let (r, v) = s.column(c);
        let dst = out.col_mut(c);
        for (&k, &x) in r.iter().zip(v) {
            for (d, &e) in dst.iter_mut().zip(a.col(k as usize)) {
                *d += x * e;
            }
        }
    }
    Ok(out)
}

/// `wᵀ · s` in `O(nnz(s) · w.cols)`.
pub fn dense_t_sparse_mul(w: &DenseMatrix, s: &SparseSketch) -> Result<DenseMatrix, LinalgError> {
    check("dense_t_sparse_mul", w.rows() == s.rows, w.shape(), (s.rows, s.cols))?;
    let mut out = DenseMatrix::zeros(w.cols(), s.cols);
    for c in 0..s.cols {
        let (r, v) = s.column(c);
        for i in 0..w.cols() {
            let wc = w.col(i);
            out[(i, c)] = r.iter().zip(v).map(|(&k, &x)| wc[k as usize] * x).sum();
        }
    }
    Ok(out)
}

/// `a · b − z` with `z` subtracted from every column: `√(p(1−p)) · a · Ω`
/// when `b` is a Bernoulli pattern and `z = a · (p 1)`.
pub fn centered_product(a: &DenseMatrix, b: &SparseSketch, z: &[f64]) -> Result<DenseMatrix, LinalgError> {
    check("centered_product", z.len() == a.rows(), a.shape(), (z.len(), 1))?;
    let mut out = sparse_dense_mul(a, b)?;
    for c in 0..out.cols() {
        out.col_mut(c).iter_mut().zip(z).for_each(|(x, &zi)| *x -= zi);
    }
    Ok(out)
}

/// `a · (p 1_n)`, the centering column for standardized Bernoulli blocks.
pub fn centering_column(a: &DenseMatrix, p: f64) -> Vec<f64> {
    let mut z = alloc::vec![0.0; a.rows()];
    for j in 0..a.cols() {
        z.iter_mut().zip(a.col(j)).for_each(|(zi, &x)| *zi += x);
    }
    z.iter_mut().for_each(|zi| *zi *= p);
    z
}

/// `a · block` for any block kind; `Centered` blocks give the unscaled
/// `a · B − z` form and therefore need `z`.
pub fn apply_block(a: &DenseMatrix, block: &SketchBlock, z: Option<&[f64]>) -> Result<DenseMatrix, LinalgError> {
    match block {
        SketchBlock::Dense(g) => crate::matrix::matmul(a, g),
        SketchBlock::Sparse(s) => sparse_dense_mul(a, s),
        SketchBlock::Centered { pattern, p } => match z {
            Some(z) => centered_product(a, pattern, z),
            None => centered_product(a, pattern, &centering_column(a, *p)),
        },
    }
}
