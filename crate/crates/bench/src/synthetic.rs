//! Seeded test matrices `A = U_A Σ_A V_Aᵀ` with prescribed spectra.

use lowrank_core::matrix::{gemm, orthonormalize, DenseMatrix, LinalgError, Transpose};
use lowrank_core::rng::{gaussian_matrix, Stream};
use serde::{Deserialize, Serialize};

/// Default working-set cap for generation, in bytes.
pub const DEFAULT_MEMORY_CAP: u64 = 3 << 30;

const LEFT_BLOCK: u64 = 0x11;
const RIGHT_BLOCK: u64 = 0x22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// `σ_j = 1/j²`.
    SlowDecay,
    /// `σ_j = e^{-j/20}`.
    FastDecay,
    /// Slow-decay spectrum with a block-diagonal `V_A` of `d` blocks.
    BlockVStability,
}

impl SyntheticKind {
    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "slow-decay" => Some(Self::SlowDecay),
            "fast-decay" => Some(Self::FastDecay),
            "block-v-stability" => Some(Self::BlockVStability),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::SlowDecay => "slow-decay",
            Self::FastDecay => "fast-decay",
            Self::BlockVStability => "block-v-stability",
        }
    }

    /// Singular values in descending order.
    pub fn spectrum(self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|j| match self {
                Self::SlowDecay | Self::BlockVStability => 1.0 / (j as f64 * j as f64),
                Self::FastDecay => (-(j as f64) / 20.0).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    /// Number of diagonal blocks of `V_A`; only read for `BlockVStability`.
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error("matrix dimension must be at least 1")]
    Empty,
    #[error("block count {d} must be positive and divide n = {n}")]
    BadBlockCount { n: usize, d: usize },
    #[error("generating a {n}x{n} matrix needs about {needed} MiB, over the {cap} MiB cap; lower n or raise the cap")]
    TooLarge { n: usize, needed: u64, cap: u64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, seed: u64) -> Self {
        Self { kind, n, d: 1, seed }
    }

    pub fn stability(n: usize, d: usize, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::BlockVStability,
            n,
            d,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.n == 0 {
            return Err(SyntheticError::Empty);
        }
        if self.kind == SyntheticKind::BlockVStability && (self.d == 0 || !self.n.is_multiple_of(self.d)) {
            return Err(SyntheticError::BadBlockCount { n: self.n, d: self.d });
        }
        Ok(())
    }

    /// Peak bytes held during generation: both factors plus the product.
    pub fn memory_estimate(&self) -> u64 {
        let n = self.n as u64;
        3 * n * n * 8
    }

    fn v_blocks(&self) -> usize {
        match self.kind {
            SyntheticKind::BlockVStability => self.d,
            _ => 1,
        }
    }
}

/// Orthogonal factors shared by every spectrum generated from one seed.
#[derive(Debug, Clone)]
pub struct SyntheticFactors {
    u: DenseMatrix,
    /// Diagonal blocks of `V_A`, each `(n/d) x (n/d)`.
    v_blocks: Vec<DenseMatrix>,
}

impl SyntheticFactors {
    pub fn new(spec: &SyntheticSpec, memory_cap: u64) -> Result<Self, SyntheticError> {
        spec.validate()?;
        let needed = spec.memory_estimate();
        if needed > memory_cap {
            return Err(SyntheticError::TooLarge {
                n: spec.n,
                needed: needed >> 20,
                cap: memory_cap >> 20,
            });
        }
        let n = spec.n;
        let u = orthonormalize(&gaussian_matrix(n, n, spec.seed, LEFT_BLOCK))?;
        let d = spec.v_blocks();
        let size = n / d;
        let v_blocks = (0..d)
            .map(|i| {
                if size == 1 {
                    // orthonormalizing a 1x1 Gaussian is its sign
                    let mut s = Stream::new(spec.seed, RIGHT_BLOCK, i as u64);
                    let g = s.normal();
                    Ok(DenseMatrix::from_diag(&[if g < 0.0 { -1.0 } else { 1.0 }]))
                } else {
                    orthonormalize(&gaussian_matrix(size, size, spec.seed, RIGHT_BLOCK + ((i as u64) << 8)))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { u, v_blocks })
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    /// `V_A` as a dense matrix.
    pub fn v(&self) -> DenseMatrix {
        let n = self.n();
        let mut v = DenseMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.v_blocks {
            for j in 0..b.cols() {
                v.col_mut(off + j)[off..off + b.rows()].copy_from_slice(b.col(j));
            }
            off += b.rows();
        }
        v
    }

    /// `U_A diag(sigma) V_Aᵀ`; `sigma` must have length `n`.
    pub fn compose(&self, sigma: &[f64]) -> Result<DenseMatrix, LinalgError> {
        let n = self.n();
        if sigma.len() != n {
            return Err(LinalgError::BadLength {
                rows: n,
                cols: 1,
                len: sigma.len(),
            });
        }
        let mut us = self.u.clone();
        us.scale_cols(sigma);
        if self.v_blocks.len() == 1 {
            let mut a = DenseMatrix::zeros(n, n);
            gemm(1.0, &us, Transpose::No, &self.v_blocks[0], Transpose::Yes, 0.0, &mut a)?;
            return Ok(a);
        }
        let mut a = DenseMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.v_blocks {
            let k = b.rows();
            let part = lowrank_core::matrix::matmul_nt(&us.columns(off..off + k), b)?;
            for j in 0..k {
                a.col_mut(off + j).copy_from_slice(part.col(j));
            }
            off += k;
        }
        Ok(a)
    }
}

/// Builds the matrix described by `spec`, refusing if the working set
/// would exceed `memory_cap` bytes.
pub fn gen_synthetic(spec: &SyntheticSpec, memory_cap: u64) -> Result<DenseMatrix, SyntheticError> {
    let factors = SyntheticFactors::new(spec, memory_cap)?;
    Ok(factors.compose(&spec.kind.spectrum(spec.n))?)
}

/// 8-bit RGB raster, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

/// A seeded 8-bit raster whose luminance has singular values decaying like
/// `j^{-1/2}`, the slow power law typical of photographs. The three channels
/// are tinted, offset copies of the luminance, quantized and clipped.
pub fn synthetic_photo(height: usize, width: usize, seed: u64) -> Result<RgbImage, LinalgError> {
    let k = height.min(width);
    let mut u = gaussian_matrix(height, k, seed, 0x1A6E);
    let v = gaussian_matrix(width, k, seed, 0x1A6F);
    let decay: Vec<f64> = (1..=k).map(|j| 1.0 / (j as f64).sqrt()).collect();
    u.scale_cols(&decay);
    let mut lum = DenseMatrix::zeros(height, width);
    gemm(1.0, &u, Transpose::No, &v, Transpose::Yes, 0.0, &mut lum)?;
    let n = (height * width) as f64;
    let mean = lum.as_slice().iter().sum::<f64>() / n;
    let std = (lum.as_slice().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let scale = if std > 0.0 { 55.0 / std } else { 0.0 };
    let mut pixels = vec![0u8; height * width * 3];
    for y in 0..height {
        for x in 0..width {
            let l = (lum[(y, x)] - mean) * scale;
            for (c, (tint, offset)) in [(1.0, 125.0), (0.85, 117.0), (0.6, 110.0)].into_iter().enumerate() {
                pixels[(y * width + x) * 3 + c] = (offset + tint * l).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(RgbImage { height, width, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lowrank_core::matrix::{matmul_tn, orthonormality_defect, sym_eig};

    #[test]
    fn spectra() {
        let s = SyntheticKind::SlowDecay.spectrum(100);
        assert_eq!((s[0], s[1], s[99]), (1.0, 0.25, 1e-4));
        let f = SyntheticKind::FastDecay.spectrum(100);
        assert!((f[19] / f[39] - core::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn composed_singular_values_match() {
        let spec = SyntheticSpec::new(SyntheticKind::FastDecay, 40, 3);
        let a = gen_synthetic(&spec, DEFAULT_MEMORY_CAP).unwrap();
        let eig = sym_eig(&matmul_tn(&a, &a).unwrap()).unwrap();
        let want = SyntheticKind::FastDecay.spectrum(40);
        for (lam, s) in eig.values.iter().rev().zip(&want) {
            assert!((lam.max(0.0).sqrt() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_v_for_unit_blocks() {
        let spec = SyntheticSpec::stability(12, 12, 4);
        let f = SyntheticFactors::new(&spec, DEFAULT_MEMORY_CAP).unwrap();
        let v = f.v();
        assert_eq!(v.max_abs(), 1.0);
        for j in 0..12 {
            for i in 0..12 {
                assert_eq!(v[(i, j)] != 0.0, i == j);
            }
        }
    }

    #[test]
    fn block_v_is_orthogonal_and_block_diagonal() {
        let spec = SyntheticSpec::stability(12, 3, 5);
        let f = SyntheticFactors::new(&spec, DEFAULT_MEMORY_CAP).unwrap();
        let v = f.v();
        assert!(orthonormality_defect(&v) < 1e-13);
        assert_eq!(v[(0, 4)], 0.0);
        let a = f.compose(&spec.kind.spectrum(12)).unwrap();
        let mut us = f.u().clone();
        us.scale_cols(&spec.kind.spectrum(12));
        let dense = lowrank_core::matrix::matmul_nt(&us, &v).unwrap();
        assert!(a.sub(&dense).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn reproducible() {
        let spec = SyntheticSpec::new(SyntheticKind::SlowDecay, 30, 9);
        assert_eq!(gen_synthetic(&spec, DEFAULT_MEMORY_CAP).unwrap(), gen_synthetic(&spec, DEFAULT_MEMORY_CAP).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(SyntheticSpec::stability(10, 3, 0).validate(), Err(SyntheticError::BadBlockCount { .. })));
        let big = SyntheticSpec::new(SyntheticKind::SlowDecay, 100_000, 0);
        let err = gen_synthetic(&big, DEFAULT_MEMORY_CAP).unwrap_err();
        assert!(err.to_string().contains("MiB"));
    }
}
