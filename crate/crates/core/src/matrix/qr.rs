use alloc::vec;
use alloc::vec::Vec;

use super::{DenseMatrix, LinalgError};
use crate::fmath;

const PANEL: usize = 32;

/// Blocked Householder QR of a tall matrix, `a = Q R`.
///
/// Reflector vectors are stored below the diagonal of `qr` with an implicit
/// unit head; `R` occupies the upper triangle.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    qr: DenseMatrix,
    tau: Vec<f64>,
}

/// `c (m x n, leading dim ldc) += alpha * op(a) * op(b)` on raw strided views.
///
/// # Safety
/// Every view must lie inside its allocation and `c` must not alias `a` or `b`.
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_view(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: *const f64,
    rsa: isize,
    csa: isize,
    b: *const f64,
    rsb: isize,
    csb: isize,
    beta: f64,
    c: *mut f64,
    ldc: usize,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, 1, ldc as isize);
}

impl HouseholderQr {
    pub fn new(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let (m, n) = a.shape();
        if m < n {
            return Err(LinalgError::DimensionMismatch {
                op: "householder qr (needs rows >= cols)",
                left: (m, n),
                right: (m, n),
            });
        }
        let mut qr = a.clone();
        let mut tau = vec![0.0; n];
        let mut k0 = 0;
        while k0 < n {
            let nb = PANEL.min(n - k0);
            for j in k0..k0 + nb {
                tau[j] = reflect_column(&mut qr, j);
                apply_reflector(&mut qr, j, tau[j], j + 1..k0 + nb);
            }
            if k0 + nb < n {
                let v = panel_vectors(&qr, k0, nb);
                let t = block_t(&v, &tau[k0..k0 + nb]);
                apply_block(&mut qr, &v, &t, k0, k0 + nb..n, true);
            }
            k0 += nb;
        }
        Ok(Self { qr, tau })
    }

    /// Upper-triangular factor `R` (n x n).
    pub fn r(&self) -> DenseMatrix {
        let n = self.qr.cols();
        DenseMatrix::from_fn(n, n, |i, j| if i <= j { self.qr[(i, j)] } else { 0.0 })
    }

    /// Thin orthonormal factor `Q` (m x n).
    pub fn thin_q(&self) -> DenseMatrix {
        let (m, n) = self.qr.shape();
        let mut q = DenseMatrix::zeros(m, n);
        for j in 0..n {
            q[(j, j)] = 1.0;
        }
        let mut starts: Vec<usize> = (0..n).step_by(PANEL).collect();
        starts.reverse();
        for k0 in starts {
            let nb = PANEL.min(n - k0);
            let v = panel_vectors(&self.qr, k0, nb);
            let t = block_t(&v, &self.tau[k0..k0 + nb]);
            apply_block(&mut q, &v, &t, k0, k0..n, false);
        }
        q
    }
}

/// Householder vector for column `j` below the diagonal; returns `tau`.
fn reflect_column(a: &mut DenseMatrix, j: usize) -> f64 {
    let col = a.col_mut(j);
    let alpha = col[j];
    let xnorm = fmath::sqrt(col[j + 1..].iter().map(|x| x * x).sum());
    if xnorm == 0.0 {
        return 0.0;
    }
    let mut beta = libm::hypot(alpha, xnorm);
    if alpha > 0.0 {
        beta = -beta;
    }
    let tau = (beta - alpha) / beta;
    let s = 1.0 / (alpha - beta);
    col[j + 1..].iter_mut().for_each(|x| *x *= s);
    col[j] = beta;
    tau
}

/// Applies `I - tau v vᵀ` (reflector stored in column `j`) to columns `cols`.
fn apply_reflector(a: &mut DenseMatrix, j: usize, tau: f64, cols: core::ops::Range<usize>) {
    if tau == 0.0 {
        return;
    }
    let m = a.rows();
    let data = a.as_mut_slice();
    let (head, tail) = data.split_at_mut((j + 1) * m);
    let v = &head[j * m..];
    for c in cols {
        let col = &mut tail[(c - j - 1) * m..(c - j) * m];
        let mut w = col[j];
        for i in j + 1..m {
            w += v[i] * col[i];
        }
        w *= tau;
        col[j] -= w;
        for i in j + 1..m {
            col[i] -= w * v[i];
        }
    }
}

/// Explicit unit-lower-trapezoidal `V` for the panel starting at `k0`,
/// restricted to rows `k0..m`.
fn panel_vectors(qr: &DenseMatrix, k0: usize, nb: usize) -> DenseMatrix {
    let m = qr.rows();
    let mut v = DenseMatrix::zeros(m - k0, nb);
    for c in 0..nb {
        let j = k0 + c;
        let src = qr.col(j);
        let dst = v.col_mut(c);
        dst[c] = 1.0;
        dst[c + 1..].copy_from_slice(&src[j + 1..]);
    }
    v
}

/// Upper-triangular `T` with `H_1 ⋯ H_nb = I - V T Vᵀ`.
fn block_t(v: &DenseMatrix, tau: &[f64]) -> DenseMatrix {
    let nb = tau.len();
    let mut t = DenseMatrix::zeros(nb, nb);
    for i in 0..nb {
        t[(i, i)] = tau[i];
        if i == 0 || tau[i] == 0.0 {
            continue;
        }
        let vi = v.col(i);
        let w: Vec<f64> = (0..i)
            .map(|c| v.col(c)[i..].iter().zip(&vi[i..]).map(|(a, b)| a * b).sum())
            .collect();
        for r in 0..i {
            let s: f64 = (r..i).map(|c| t[(r, c)] * w[c]).sum();
            t[(r, i)] = -tau[i] * s;
        }
    }
    t
}

/// `a[k0.., cols] ← (I - V T' Vᵀ) a[k0.., cols]` with `T' = Tᵀ` when
/// `transpose_t` (applying `Qᵀ`) and `T' = T` otherwise (applying `Q`).
fn apply_block(
    a: &mut DenseMatrix,
    v: &DenseMatrix,
    t: &DenseMatrix,
    k0: usize,
    cols: core::ops::Range<usize>,
    transpose_t: bool,
) {
    let m = a.rows();
    let rows = m - k0;
    let nb = v.cols();
    let ncols = cols.len();
    if ncols == 0 {
        return;
    }
    let mut w = DenseMatrix::zeros(nb, ncols);
    let mut tw = DenseMatrix::zeros(nb, ncols);
    let (rst, cst) = if transpose_t {
        (nb as isize, 1)
    } else {
        (1, nb as isize)
    };
    let base = k0 + cols.start * m;
    // SAFETY: the block a[k0..m, cols] lies inside `a` with leading dimension
    // `m`; `v`, `t`, `w`, `tw` are separate allocations of the stated shapes.
    unsafe {
        let a_ptr = a.as_mut_slice().as_mut_ptr().add(base);
        // W = Vᵀ A_blk
        gemm_view(
            nb,
            rows,
            ncols,
            1.0,
            v.as_slice().as_ptr(),
            rows as isize,
            1,
            a_ptr,
            1,
            m as isize,
            0.0,
            w.as_mut_slice().as_mut_ptr(),
            nb,
        );
        gemm_view(
            nb,
            nb,
            ncols,
            1.0,
            t.as_slice().as_ptr(),
            rst,
            cst,
            w.as_slice().as_ptr(),
            1,
            nb as isize,
            0.0,
            tw.as_mut_slice().as_mut_ptr(),
            nb,
        );
        // A_blk -= V (T' W)
        gemm_view(
            rows,
            nb,
            ncols,
            -1.0,
            v.as_slice().as_ptr(),
            1,
            rows as isize,
            tw.as_slice().as_ptr(),
            1,
            nb as isize,
            1.0,
            a_ptr,
            m,
        );
    }
}

/// Orthonormal basis of the column space of a full-rank tall matrix.
///
/// Signs are fixed so that `R` has a positive diagonal, which makes the
/// result the Gram–Schmidt basis and, for Gaussian input, Haar distributed.
pub fn orthonormalize(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let qr = HouseholderQr::new(a)?;
    let mut q = qr.thin_q();
    let signs: Vec<f64> = (0..a.cols())
        .map(|j| if qr.qr[(j, j)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    q.scale_cols(&signs);
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{matmul, orthonormality_defect};
    use crate::rng::test_matrix;

    /// Modified Gram–Schmidt, run twice for stability.
    fn mgs2(a: &DenseMatrix) -> DenseMatrix {
        let mut q = a.clone();
        for _ in 0..2 {
            for j in 0..q.cols() {
                for i in 0..j {
                    let d: f64 = q.col(i).iter().zip(q.col(j)).map(|(x, y)| x * y).sum();
                    let qi = q.col(i).to_vec();
                    q.col_mut(j).iter_mut().zip(&qi).for_each(|(x, y)| *x -= d * y);
                }
                let nrm = q.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
                q.col_mut(j).iter_mut().for_each(|x| *x /= nrm);
            }
        }
        q
    }

    #[test]
    fn reconstructs_and_is_orthonormal() {
        for &(m, n) in &[(5, 3), (40, 40), (130, 75), (200, 33)] {
            let a = test_matrix(m, n, (m * n) as u64);
            let qr = HouseholderQr::new(&a).unwrap();
            let q = qr.thin_q();
            let back = matmul(&q, &qr.r()).unwrap();
            assert!(back.sub(&a).unwrap().max_abs() < 1e-11 * a.max_abs() * m as f64);
            assert!(orthonormality_defect(&q) < 1e-13 * m as f64);
        }
    }

    #[test]
    fn matches_gram_schmidt_oracle() {
        let a = test_matrix(90, 70, 3);
        let q = orthonormalize(&a).unwrap();
        assert!(q.sub(&mgs2(&a)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn identity_input() {
        let q = orthonormalize(&DenseMatrix::identity(4)).unwrap();
        assert!(q.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn rejects_wide_input() {
        assert!(HouseholderQr::new(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
