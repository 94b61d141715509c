use alloc::vec;
use alloc::vec::Vec;

use super::{matmul, matmul_tn, DenseMatrix, LinalgError};
use crate::fmath;

/// Relative eigenvalue floor below which [`eig_svd`] reports rank deficiency.
pub const EIG_TOL: f64 = 1e-12;

const QL_MAX_ITER: usize = 60;
const JACOBI_MAX_SWEEPS: usize = 30;

#[derive(Debug, Clone)]
pub struct SymEigResult {
    /// Orthogonal matrix whose columns are eigenvectors.
    pub vectors: DenseMatrix,
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
}

/// Economic SVD `w = u · diag(sigma) · vᵀ` with ascending singular values.
#[derive(Debug, Clone)]
pub struct EigSvdResult {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

fn check_symmetric(m: &DenseMatrix) -> Result<(), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let asym = m.asymmetry();
    if asym > 1e-12 * m.frob_norm() {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Symmetric eigendecomposition by Householder tridiagonalization followed by
/// the implicit QL algorithm (the EISPACK `tred2`/`tql2` pair).
pub fn sym_eig(m: &DenseMatrix) -> Result<SymEigResult, LinalgError> {
    check_symmetric(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(SymEigResult {
            vectors: DenseMatrix::zeros(0, 0),
            values: Vec::new(),
        });
    }
    let mut v = m.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok(SymEigResult {
        vectors: v,
        values: d,
    })
}

fn tred2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = v.rows();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| fmath::abs(*x)).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = fmath::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    let vkj = v[(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = v.col_mut(j);
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                let col = v.col_mut(j);
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<(), LinalgError> {
    let n = v.rows();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(fmath::abs(d[l]) + fmath::abs(e[l]));
        let mut m = l;
        while m < n {
            if fmath::abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(LinalgError::NoConvergence { iterations: iter });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[(l + 2)..n].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_cols(v, i, i + 1, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if fmath::abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    sort_ascending(v, d);
    Ok(())
}

/// Columns `(i, k)` ← `(c·vi − s·vk, s·vi + c·vk)`.
#[inline]
fn rotate_cols(v: &mut DenseMatrix, i: usize, k: usize, c: f64, s: f64) {
    let n = v.rows();
    let data = v.as_mut_slice();
    let (lo, hi) = data.split_at_mut(k * n);
    let ci = &mut lo[i * n..(i + 1) * n];
    let ck = &mut hi[..n];
    for (a, b) in ci.iter_mut().zip(ck.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

fn sort_ascending(v: &mut DenseMatrix, d: &mut [f64]) {
    let n = d.len();
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for r in 0..v.rows() {
                let a = v[(r, i)];
                v[(r, i)] = v[(r, k)];
                v[(r, k)] = a;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition: rotations until the off-diagonal mass
/// drops below `1e-14·‖m‖_F`, at most 30 sweeps. Slower than [`sym_eig`] but
/// an independent route, used to cross-check it.
pub fn jacobi_eig(m: &DenseMatrix) -> Result<SymEigResult, LinalgError> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut a = m.clone();
    a.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let thresh = 1e-14 * m.frob_norm();
    let off = |a: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        fmath::sqrt(s)
    };
    let mut sweeps = 0;
    while off(&a) > thresh {
        sweeps += 1;
        if sweeps > JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { iterations: sweeps });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = {
                    let t = 1.0 / (fmath::abs(theta) + libm::hypot(theta, 1.0));
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / libm::hypot(t, 1.0);
                let s = t * c;
                // A ← Jᵀ A J with J the (p, q) rotation.
                rotate_cols(&mut a, p, q, c, s);
                for k in 0..n {
                    let akp = a[(p, k)];
                    let akq = a[(q, k)];
                    a[(p, k)] = c * akp - s * akq;
                    a[(q, k)] = s * akp + c * akq;
                }
                rotate_cols(&mut v, p, q, c, s);
            }
        }
    }
    let mut d = a.diagonal();
    sort_ascending(&mut v, &mut d);
    Ok(SymEigResult {
        vectors: v,
        values: d,
    })
}

/// eigSVD with the default relative tolerance [`EIG_TOL`].
pub fn eig_svd(w: &DenseMatrix) -> Result<EigSvdResult, LinalgError> {
    eig_svd_with_tol(w, EIG_TOL)
}

/// Economic SVD of a tall matrix through the eigendecomposition of `wᵀw`.
///
/// Singular values are the norms of the columns of `w·V` (equal to the square
/// roots of the Gram eigenvalues, but accurate well below `√ε` relative), and
/// the columns of `u` are those products normalized. Reports
/// [`LinalgError::RankDeficient`] when `σ_min² ≤ eig_tol · σ_max²`; with
/// `eig_tol = 0` only an exactly vanishing or non-finite column fails.
pub fn eig_svd_with_tol(w: &DenseMatrix, eig_tol: f64) -> Result<EigSvdResult, LinalgError> {
    let b = w.cols();
    if w.rows() < b {
        return Err(LinalgError::RankDeficient {
            index: w.rows(),
            ratio: 0.0,
        });
    }
    let mut gram = matmul_tn(w, w)?;
    gram.symmetrize();
    let eig = sym_eig(&gram)?;
    let mut u = matmul(w, &eig.vectors)?;
    let mut sigma: Vec<f64> = (0..b)
        .map(|j| fmath::sqrt(u.col(j).iter().map(|x| x * x).sum::<f64>()))
        .collect();

    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| sigma[i].total_cmp(&sigma[j]));
    let v = eig.vectors.select_cols(&order);
    u = u.select_cols(&order);
    sigma = order.iter().map(|&i| sigma[i]).collect();

    if b > 0 {
        let smax = sigma[b - 1];
        let smin = sigma[0];
        let ratio = if smax > 0.0 { (smin / smax) * (smin / smax) } else { 0.0 };
        if !smin.is_finite() || smin <= 0.0 || ratio <= eig_tol {
            return Err(LinalgError::RankDeficient { index: 0, ratio });
        }
    }
    let inv: Vec<f64> = sigma.iter().map(|s| 1.0 / s).collect();
    u.scale_cols(&inv);
    Ok(EigSvdResult { u, sigma, v })
}
