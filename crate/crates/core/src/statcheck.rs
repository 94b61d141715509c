//! Empirical checks that projected sketch entries behave like standard
//! Gaussians: one-sample Kolmogorov–Smirnov distances and pairwise
//! decorrelation.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::matrix::DenseMatrix;
use crate::rng::Stream;
use crate::sketch::{SketchKind, SketchSpec};

/// Block id reserved for replicate streams.
const REPLICATE_BLOCK: u64 = 0x5EED_0000;
pub const MIN_KS_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("projection row has norm {norm}, expected 1")]
    NotUnit { norm: f64 },
    #[error("projection matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error(transparent)]
    Sketch(#[from] crate::sketch::SketchError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsReport {
    /// `sup_x |F_N(x) − Φ(x)|`.
    pub statistic: f64,
    pub sample_size: usize,
    /// `Σ_k |u_k|³` of the projection row, when one was involved.
    pub bound_scale: Option<f64>,
}

impl KsReport {
    pub fn with_bound_scale(mut self, u_row: &[f64]) -> Self {
        self.bound_scale = Some(cubic_scale(u_row));
        self
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * fmath::erfc(-x / core::f64::consts::SQRT_2)
}

/// `Σ_k |u_k|³`.
pub fn cubic_scale(u_row: &[f64]) -> f64 {
    u_row.iter().map(|x| fmath::abs(x * x * x)).sum()
}

/// Asymptotic one-sample KS critical value at level `alpha`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    fmath::sqrt(-0.5 * fmath::ln(alpha / 2.0)) / fmath::sqrt(n as f64)
}

/// Exact one-sample KS distance of `samples` to the standard normal.
pub fn ks_vs_normal(samples: &[f64]) -> Result<KsReport, StatError> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(StatError::TooFewSamples {
            got: samples.len(),
            min: MIN_KS_SAMPLES,
        });
    }
    if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
        return Err(StatError::NonFinite { index });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsReport {
        statistic: d.clamp(0.0, 1.0),
        sample_size: xs.len(),
        bound_scale: None,
    })
}

/// One draw of `u · ω` for a fresh sketch column `ω` of length `u.len()`,
/// standardized for `StdBernoulli`.
fn projected_entry(u: &[f64], u_sum: f64, spec: &SketchSpec, col: u64, rows: &mut Vec<u32>, vals: &mut Vec<f64>) -> f64 {
    if spec.kind == SketchKind::Gaussian {
        let mut s = Stream::new(spec.seed, REPLICATE_BLOCK, col);
        return u.iter().map(|&x| x * s.normal()).sum();
    }
    rows.clear();
    vals.clear();
    spec.sparse_column(u.len(), REPLICATE_BLOCK, col, rows, vals);
    let dot: f64 = rows.iter().zip(vals.iter()).map(|(&r, &v)| u[r as usize] * v).sum();
    if spec.kind == SketchKind::StdBernoulli {
        (dot - spec.p * u_sum) / spec.std_scale()
    } else {
        dot
    }
}

/// `reps` independent draws of `(UΩ)_{ij}` for the row `u_row` of `U`.
pub fn projected_sketch_samples(u_row: &[f64], spec: &SketchSpec, reps: usize) -> Result<Vec<f64>, StatError> {
    spec.validate()?;
    let norm = fmath::sqrt(u_row.iter().map(|x| x * x).sum());
    if fmath::abs(norm - 1.0) > 1e-10 {
        return Err(StatError::NotUnit { norm });
    }
    let u_sum: f64 = u_row.iter().sum();
    let (mut rows, mut vals) = (Vec::new(), Vec::new());
    Ok((0..reps as u64)
        .map(|r| projected_entry(u_row, u_sum, spec, r, &mut rows, &mut vals))
        .collect())
}

/// Largest absolute sample correlation among the entries of `UΩ` in up to
/// `max_rows` evenly spaced rows and two sketch columns, over `reps`
/// replicates. `u` is assumed orthogonal.
pub fn cross_correlation_check(u: &DenseMatrix, spec: &SketchSpec, reps: usize, max_rows: usize) -> Result<f64, StatError> {
    spec.validate()?;
    let n = u.rows();
    if !u.is_square() {
        return Err(StatError::NotSquare { rows: n, cols: u.cols() });
    }
    if reps < 2 {
        return Err(StatError::TooFewSamples { got: reps, min: 2 });
    }
    let s = max_rows.clamp(1, n);
    let picked: Vec<Vec<f64>> = (0..s)
        .map(|i| {
            let r = i * n / s;
            (0..n).map(|j| u[(r, j)]).collect()
        })
        .collect();
    let sums: Vec<f64> = picked.iter().map(|r| r.iter().sum()).collect();
    let vars = 2 * s;
    let mut mean = vec![0.0; vars];
    let mut cross = vec![0.0; vars * vars];
    let (mut rows, mut vals) = (Vec::new(), Vec::new());
    let mut x = vec![0.0; vars];
    let mut dense = vec![0.0; n];
    for r in 0..reps as u64 {
        for c in 0..2u64 {
            let col = 2 * r + c;
            if spec.kind == SketchKind::Gaussian {
                let mut st = Stream::new(spec.seed, REPLICATE_BLOCK, col);
                dense.iter_mut().for_each(|v| *v = st.normal());
                for (i, row) in picked.iter().enumerate() {
                    x[c as usize * s + i] = row.iter().zip(&dense).map(|(a, b)| a * b).sum();
                }
            } else {
                rows.clear();
                vals.clear();
                spec.sparse_column(n, REPLICATE_BLOCK, col, &mut rows, &mut vals);
                for (i, row) in picked.iter().enumerate() {
                    let dot: f64 = rows.iter().zip(&vals).map(|(&k, &v)| row[k as usize] * v).sum();
                    x[c as usize * s + i] = if spec.kind == SketchKind::StdBernoulli {
                        (dot - spec.p * sums[i]) / spec.std_scale()
                    } else {
                        dot
                    };
                }
            }
        }
        for a in 0..vars {
            mean[a] += x[a];
            for b in 0..vars {
                cross[a * vars + b] += x[a] * x[b];
            }
        }
    }
    let n_reps = reps as f64;
    mean.iter_mut().for_each(|m| *m /= n_reps);
    let cov = |a: usize, b: usize| cross[a * vars + b] / n_reps - mean[a] * mean[b];
    let mut worst: f64 = 0.0;
    for a in 0..vars {
        for b in (a + 1)..vars {
            let denom = fmath::sqrt(cov(a, a) * cov(b, b));
            if denom > 0.0 {
                worst = worst.max(fmath::abs(cov(a, b) / denom));
            }
        }
    }
    Ok(worst)
}

/// Sylvester–Hadamard matrix scaled to be orthogonal; `n` must be a power of two.
pub fn scaled_hadamard(n: usize) -> DenseMatrix {
    assert!(n.is_power_of_two(), "Hadamard order must be a power of two");
    let s = 1.0 / fmath::sqrt(n as f64);
    DenseMatrix::from_fn(n, n, |i, j| if (i & j).count_ones() % 2 == 0 { s } else { -s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::orthonormality_defect;
    use crate::rng::Stream;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((normal_cdf(-2.5) - 0.006_209_665_325_776_132).abs() < 1e-12);
    }

    #[test]
    fn gaussian_samples_pass() {
        let mut s = Stream::new(3, 0, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| s.normal()).collect();
        let r = ks_vs_normal(&xs).unwrap();
        assert!(r.statistic < 1.95 / (xs.len() as f64).sqrt());
        assert!((ks_critical_value(100_000, 0.001) * 316.227_766 - 1.9495).abs() < 1e-3);
    }

    #[test]
    fn point_mass_and_two_point_law() {
        assert_eq!(ks_vs_normal(&[0.0; 200]).unwrap().statistic, 0.5);
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let d = ks_vs_normal(&xs).unwrap().statistic;
        assert!((d - (normal_cdf(1.0) - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_or_nan_input() {
        assert!(matches!(ks_vs_normal(&[0.0; 99]), Err(StatError::TooFewSamples { .. })));
        let mut xs = vec![0.0; 150];
        xs[7] = f64::NAN;
        assert_eq!(ks_vs_normal(&xs), Err(StatError::NonFinite { index: 7 }));
    }

    #[test]
    fn unit_vector_projection_is_a_single_entry() {
        let mut e1 = vec![0.0; 50];
        e1[0] = 1.0;
        let p = 0.2;
        let spec = SketchSpec::new(SketchKind::SparseSign, p, 1).unwrap();
        let xs = projected_sketch_samples(&e1, &spec, 5000).unwrap();
        let v = 1.0 / p.sqrt();
        assert!(xs.iter().all(|&x| x == 0.0 || x == v || x == -v));
        let zeros = xs.iter().filter(|&&x| x == 0.0).count() as f64 / 5000.0;
        assert!((zeros - 0.8).abs() < 0.03);
        assert!(projected_sketch_samples(&[0.5, 0.5], &spec, 10).is_err());
    }

    #[test]
    fn flat_row_std_bernoulli_rate() {
        let n = 1024;
        let row = vec![1.0 / (n as f64).sqrt(); n];
        assert!((cubic_scale(&row) - 1.0 / (n as f64).sqrt()).abs() < 1e-15);
        let spec = SketchSpec::new(SketchKind::StdBernoulli, 0.5, 9).unwrap();
        let xs = projected_sketch_samples(&row, &spec, 100_000).unwrap();
        let r = ks_vs_normal(&xs).unwrap().with_bound_scale(&row);
        assert!(r.statistic <= r.bound_scale.unwrap());
    }

    #[test]
    fn sparse_gaussian_projection_variance() {
        let n = 256;
        let h = scaled_hadamard(n);
        let row: Vec<f64> = (0..n).map(|j| h[(3, j)]).collect();
        let spec = SketchSpec::new(SketchKind::SparseGaussian, 0.05, 4).unwrap();
        let xs = projected_sketch_samples(&row, &spec, 100_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn hadamard_is_orthogonal() {
        assert!(orthonormality_defect(&scaled_hadamard(64)) < 1e-14);
    }

    #[test]
    fn correlations_vanish() {
        let reps = 10_000;
        let bound = 4.0 / (reps as f64).sqrt();
        let h = scaled_hadamard(128);
        let g = cross_correlation_check(&h, &SketchSpec::gaussian(2), reps, 6).unwrap();
        assert!(g < bound, "{g}");
        let sb = SketchSpec::new(SketchKind::StdBernoulli, 0.1, 3).unwrap();
        let c = cross_correlation_check(&h, &sb, reps, 6).unwrap();
        assert!(c < 5.0 / (reps as f64).sqrt(), "{c}");
        let half = SketchSpec::new(SketchKind::StdBernoulli, 0.5, 4).unwrap();
        let i = cross_correlation_check(&DenseMatrix::identity(64), &half, reps, 6).unwrap();
        assert!(i < 5.0 / (reps as f64).sqrt(), "{i}");
    }
}
