use super::{DenseMatrix, LinalgError};
use crate::fmath;

/// A Cholesky pivot at or below `PIVOT_TOL · max_i z_ii` is treated as breakdown.
pub const PIVOT_TOL: f64 = 1e-12;

/// Lower Cholesky factor `z = L Lᵀ`, extendable by bordering.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    max_diag: f64,
    pivot_tol: f64,
}

impl Cholesky {
    pub fn empty() -> Self {
        Self {
            l: DenseMatrix::zeros(0, 0),
            max_diag: 0.0,
            pivot_tol: PIVOT_TOL,
        }
    }

    pub fn factor(z: &DenseMatrix) -> Result<Self, LinalgError> {
        Self::factor_with_tol(z, PIVOT_TOL)
    }

    pub fn factor_with_tol(z: &DenseMatrix, pivot_tol: f64) -> Result<Self, LinalgError> {
        if !z.is_square() {
            return Err(LinalgError::NotSquare {
                rows: z.rows(),
                cols: z.cols(),
            });
        }
        let max_diag = z.diagonal().into_iter().fold(0.0, f64::max);
        let l = factor_in_place(z.clone(), max_diag, pivot_tol, 0)?;
        Ok(Self {
            l,
            max_diag,
            pivot_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor_l(&self) -> &DenseMatrix {
        &self.l
    }

    /// Factor of the bordered matrix `[[z, z12], [z12ᵀ, z22]]`, where `z` is
    /// the matrix currently factored. Only the new rows of `L` are computed.
    pub fn extended(&self, z12: &DenseMatrix, z22: &DenseMatrix) -> Result<Self, LinalgError> {
        let old = self.dim();
        let new = z22.rows();
        if z12.rows() != old || z12.cols() != new || !z22.is_square() {
            return Err(LinalgError::DimensionMismatch {
                op: "cholesky extend",
                left: z12.shape(),
                right: z22.shape(),
            });
        }
        let max_diag = z22.diagonal().into_iter().fold(self.max_diag, f64::max);
        // L21ᵀ = L11⁻¹ Z12
        let mut l21t = z12.clone();
        self.forward_in_place(&mut l21t);
        let mut schur = z22.clone();
        super::gemm(
            -1.0,
            &l21t,
            super::Transpose::Yes,
            &l21t,
            super::Transpose::No,
            1.0,
            &mut schur,
        )?;
        schur.symmetrize();
        let l22 = factor_in_place(schur, max_diag, self.pivot_tol, old)?;

        let n = old + new;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..old {
            l.col_mut(j)[..old].copy_from_slice(self.l.col(j));
            for i in 0..new {
                l[(old + i, j)] = l21t[(j, i)];
            }
        }
        for j in 0..new {
            l.col_mut(old + j)[old..].copy_from_slice(l22.col(j));
        }
        Ok(Self {
            l,
            max_diag,
            pivot_tol: self.pivot_tol,
        })
    }

    /// `x ← L⁻¹ x`, column by column.
    pub fn forward_in_place(&self, x: &mut DenseMatrix) {
        let n = self.dim();
        assert_eq!(x.rows(), n);
        for c in 0..x.cols() {
            let col = x.col_mut(c);
            for j in 0..n {
                let lj = self.l.col(j);
                col[j] /= lj[j];
                let xj = col[j];
                for i in (j + 1)..n {
                    col[i] -= xj * lj[i];
                }
            }
        }
    }

    /// `x ← L⁻ᵀ x`.
    pub fn backward_in_place(&self, x: &mut DenseMatrix) {
        let n = self.dim();
        assert_eq!(x.rows(), n);
        for c in 0..x.cols() {
            let col = x.col_mut(c);
            for j in (0..n).rev() {
                let lj = self.l.col(j);
                let s: f64 = ((j + 1)..n).map(|i| lj[i] * col[i]).sum();
                col[j] = (col[j] - s) / lj[j];
            }
        }
    }

    /// `x ← x L₂₂⁻ᵀ`, where `L₂₂` is the trailing diagonal block of `L`
    /// starting at `start` and `x` has `dim − start` columns.
    pub fn right_solve_tail_transposed(&self, start: usize, x: &mut DenseMatrix) {
        let n = self.dim();
        assert_eq!(x.cols(), n - start);
        for j in 0..n - start {
            for k in 0..j {
                let ljk = self.l[(start + j, start + k)];
                if ljk != 0.0 {
                    let rows = x.rows();
                    let (head, tail) = x.as_mut_slice().split_at_mut(j * rows);
                    let yk = &head[k * rows..(k + 1) * rows];
                    tail[..yk.len()].iter_mut().zip(yk).for_each(|(a, b)| *a -= ljk * b);
                }
            }
            let d = self.l[(start + j, start + j)];
            x.col_mut(j).iter_mut().for_each(|v| *v /= d);
        }
    }

    /// Solves `z x = rhs`.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if rhs.rows() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                op: "cholesky solve",
                left: (self.dim(), self.dim()),
                right: rhs.shape(),
            });
        }
        let mut x = rhs.clone();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        Ok(x)
    }

    /// `tr(t z⁻¹)` for a square `t` of the factored size.
    pub fn trace_of_product(&self, t: &DenseMatrix) -> Result<f64, LinalgError> {
        if !t.is_square() {
            return Err(LinalgError::NotSquare {
                rows: t.rows(),
                cols: t.cols(),
            });
        }
        // tr(T Z⁻¹) = tr(Z⁻¹ T)
        Ok(self.solve(t)?.trace())
    }
}

fn factor_in_place(
    mut a: DenseMatrix,
    max_diag: f64,
    pivot_tol: f64,
    index_offset: usize,
) -> Result<DenseMatrix, LinalgError> {
    let n = a.rows();
    let floor = pivot_tol * max_diag;
    for j in 0..n {
        let d = a[(j, j)];
        if !(d > floor) || !d.is_finite() {
            return Err(LinalgError::RankDeficient {
                index: index_offset + j,
                ratio: if max_diag > 0.0 { d / max_diag } else { 0.0 },
            });
        }
        let ljj = fmath::sqrt(d);
        let data = a.as_mut_slice();
        let (head, tail) = data.split_at_mut((j + 1) * n);
        let cj = &mut head[j * n..];
        cj[j] = ljj;
        for v in cj[j + 1..].iter_mut() {
            *v /= ljj;
        }
        cj[..j].iter_mut().for_each(|v| *v = 0.0);
        // Right-looking update of the trailing lower triangle.
        for k in (j + 1)..n {
            let lkj = cj[k];
            if lkj == 0.0 {
                continue;
            }
            let ck = &mut tail[(k - j - 1) * n..(k - j) * n];
            for i in k..n {
                ck[i] -= lkj * cj[i];
            }
        }
    }
    Ok(a)
}

/// Solves `z x = rhs` for symmetric positive definite `z`.
pub fn chol_solve(z: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    Cholesky::factor(z)?.solve(rhs)
}

/// `tr(t z⁻¹)` through a Cholesky solve.
pub fn trace_of_product_solve(t: &DenseMatrix, z: &DenseMatrix) -> Result<f64, LinalgError> {
    if t.shape() != z.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "trace_of_product_solve",
            left: t.shape(),
            right: z.shape(),
        });
    }
    Cholesky::factor(z)?.trace_of_product(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{matmul, matmul_tn};
    use crate::rng::test_matrix;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let g = test_matrix(n, n, seed);
        let mut z = matmul_tn(&g, &g).unwrap();
        z.axpy(1.0, &DenseMatrix::identity(n)).unwrap();
        z
    }

    /// Gauss–Jordan inverse, independent of the Cholesky path.
    fn gauss_jordan_inverse(m: &DenseMatrix) -> DenseMatrix {
        let n = m.rows();
        let mut a = m.clone();
        let mut inv = DenseMatrix::identity(n);
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
            for j in 0..n {
                let (x, y) = (a[(c, j)], a[(p, j)]);
                a[(c, j)] = y;
                a[(p, j)] = x;
                let (x, y) = (inv[(c, j)], inv[(p, j)]);
                inv[(c, j)] = y;
                inv[(p, j)] = x;
            }
            let d = a[(c, c)];
            for j in 0..n {
                a[(c, j)] /= d;
                inv[(c, j)] /= d;
            }
            for i in 0..n {
                if i != c {
                    let f = a[(i, c)];
                    for j in 0..n {
                        a[(i, j)] -= f * a[(c, j)];
                        inv[(i, j)] -= f * inv[(c, j)];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn identity_system() {
        let rhs = test_matrix(4, 2, 1);
        assert_eq!(chol_solve(&DenseMatrix::identity(4), &rhs).unwrap(), rhs);
    }

    #[test]
    fn scalar_system() {
        let x = chol_solve(&DenseMatrix::from_diag(&[4.0]), &DenseMatrix::from_diag(&[8.0])).unwrap();
        assert_eq!(x[(0, 0)], 2.0);
    }

    #[test]
    fn random_spd_residual() {
        let z = random_spd(8, 3);
        let rhs = test_matrix(8, 3, 4);
        let x = chol_solve(&z, &rhs).unwrap();
        let r = matmul(&z, &x).unwrap().sub(&rhs).unwrap().frob_norm();
        assert!(r < 1e-10);
        assert!(r <= 1e-10 * z.frob_norm() * x.frob_norm());
    }

    #[test]
    fn trace_identities() {
        let t = test_matrix(5, 5, 9);
        let tr = trace_of_product_solve(&t, &DenseMatrix::identity(5)).unwrap();
        assert!((tr - t.trace()).abs() < 1e-12);
        let z = random_spd(5, 10);
        assert!((trace_of_product_solve(&z, &z).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn trace_matches_explicit_inverse() {
        let z = random_spd(6, 12);
        let t = random_spd(6, 13);
        let oracle = matmul(&t, &gauss_jordan_inverse(&z)).unwrap().trace();
        let got = trace_of_product_solve(&t, &z).unwrap();
        assert!((got - oracle).abs() < 1e-10 * oracle.abs().max(1.0));
    }

    #[test]
    fn bordered_extension_matches_full_factor() {
        let z = random_spd(9, 14);
        let head = Cholesky::factor(&z.top_left(5, 5)).unwrap();
        let z12 = DenseMatrix::from_fn(5, 4, |i, j| z[(i, 5 + j)]);
        let z22 = DenseMatrix::from_fn(4, 4, |i, j| z[(5 + i, 5 + j)]);
        let ext = head.extended(&z12, &z22).unwrap();
        let full = Cholesky::factor(&z).unwrap();
        assert!(ext.factor_l().sub(full.factor_l()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn tail_right_solve() {
        let z = random_spd(7, 15);
        let ch = Cholesky::factor(&z).unwrap();
        let x0 = test_matrix(5, 4, 16);
        let mut x = x0.clone();
        ch.right_solve_tail_transposed(3, &mut x);
        let l22 = DenseMatrix::from_fn(4, 4, |i, j| ch.factor_l()[(3 + i, 3 + j)]);
        let back = matmul(&x, &l22.transpose()).unwrap();
        assert!(back.sub(&x0).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn breakdown_reports_rank_deficiency() {
        let g = test_matrix(6, 3, 2);
        let z = matmul(&g, &g.transpose()).unwrap(); // rank 3, size 6
        assert!(matches!(Cholesky::factor(&z), Err(LinalgError::RankDeficient { .. })));
        let neg = DenseMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            chol_solve(&neg, &DenseMatrix::identity(2)),
            Err(LinalgError::RankDeficient { index: 1, .. })
        ));
    }

    #[test]
    fn inverse_helper() {
        let z = random_spd(4, 20);
        let inv = chol_solve(&z, &DenseMatrix::identity(z.rows())).unwrap();
        let prod = matmul(&z, &inv).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-10);
    }
}
