use core::sync::atomic::{AtomicUsize, Ordering};

use super::{DenseMatrix, LinalgError};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Sets the number of worker threads used by large products.
///
/// Work is split over disjoint output columns and every entry is reduced in
/// the same order regardless of the split, so results are bit-identical for
/// any thread count. `1` is the deterministic single-threaded mode. Without
/// the `std` feature the setting is recorded but ignored.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

impl Transpose {
    fn apply(self, shape: (usize, usize)) -> (usize, usize) {
        match self {
            Transpose::No => shape,
            Transpose::Yes => (shape.1, shape.0),
        }
    }

    /// (row stride, column stride) of the logical operand.
    fn strides(self, m: &DenseMatrix) -> (isize, isize) {
        let ld = m.rows() as isize;
        match self {
            Transpose::No => (1, ld),
            Transpose::Yes => (ld, 1),
        }
    }
}

/// `c = alpha * op(a) * op(b) + beta * c`.
pub fn gemm(
    alpha: f64,
    a: &DenseMatrix,
    ta: Transpose,
    b: &DenseMatrix,
    tb: Transpose,
    beta: f64,
    c: &mut DenseMatrix,
) -> Result<(), LinalgError> {
    let (m, k) = ta.apply(a.shape());
    let (k2, n) = tb.apply(b.shape());
    if k != k2 || c.shape() != (m, n) {
        return Err(LinalgError::DimensionMismatch {
            op: "gemm",
            left: (m, k),
            right: (k2, n),
        });
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        c.scale(beta);
        return Ok(());
    }
    let (rsa, csa) = ta.strides(a);
    let (rsb, csb) = tb.strides(b);
    let ldc = m;

    let run = |c_cols: &mut [f64], col0: usize, ncols: usize| {
        // SAFETY: all pointers address live slices, the logical shapes
        // (m x k), (k x ncols) and (m x ncols) fit inside them given the
        // strides computed above, and `c_cols` does not alias `a` or `b`.
        unsafe {
            let b_ptr = b.as_slice().as_ptr().offset(col0 as isize * csb);
            matrixmultiply::dgemm(
                m,
                k,
                ncols,
                alpha,
                a.as_slice().as_ptr(),
                rsa,
                csa,
                b_ptr,
                rsb,
                csb,
                beta,
                c_cols.as_mut_ptr(),
                1,
                ldc as isize,
            );
        }
    };

    let workers = worker_count(m, n, k);
    if workers <= 1 {
        run(c.as_mut_slice(), 0, n);
        return Ok(());
    }
    split_columns(c.as_mut_slice(), ldc, n, workers, run);
    Ok(())
}

fn worker_count(m: usize, n: usize, k: usize) -> usize {
    let t = threads();
    if t <= 1 || (m as u128) * (n as u128) * (k as u128) < 1 << 22 {
        return 1;
    }
    t.min(n)
}

#[cfg(feature = "std")]
fn split_columns<F>(c: &mut [f64], ldc: usize, n: usize, workers: usize, run: F)
where
    F: Fn(&mut [f64], usize, usize) + Sync,
{
    let per = n.div_ceil(workers);
    std::thread::scope(|s| {
        let mut rest = c;
        let mut col0 = 0;
        while col0 < n {
            let ncols = per.min(n - col0);
            let (head, tail) = rest.split_at_mut(ncols * ldc);
            rest = tail;
            let run = &run;
            s.spawn(move || run(head, col0, ncols));
            col0 += ncols;
        }
    });
}

#[cfg(not(feature = "std"))]
fn split_columns<F>(c: &mut [f64], _ldc: usize, n: usize, _workers: usize, run: F)
where
    F: Fn(&mut [f64], usize, usize) + Sync,
{
    run(c, 0, n);
}

/// `a * b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if a.cols() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut c = DenseMatrix::zeros(a.rows(), b.cols());
    gemm(1.0, a, Transpose::No, b, Transpose::No, 0.0, &mut c)?;
    Ok(c)
}

/// `aᵀ * b`.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "matmul_tn",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut c = DenseMatrix::zeros(a.cols(), b.cols());
    gemm(1.0, a, Transpose::Yes, b, Transpose::No, 0.0, &mut c)?;
    Ok(c)
}

/// `a * bᵀ`.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if a.cols() != b.cols() {
        return Err(LinalgError::DimensionMismatch {
            op: "matmul_nt",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut c = DenseMatrix::zeros(a.rows(), b.rows());
    gemm(1.0, a, Transpose::No, b, Transpose::Yes, 0.0, &mut c)?;
    Ok(c)
}
