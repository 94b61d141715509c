//! Statistical studies shared by the command line and the acceptance
//! suite: the Kolmogorov distance ladder, bound coverage and pseudo-inverse
//! Monte Carlo.

use lowrank_core::bounds::{asymptotic_bounds, classical_bounds, classical_expected, pinv_norm_asymptotics, BoundInputs, BoundsError, MpLaw};
use lowrank_core::farpca::{accumulate, StopRule};
use lowrank_core::matrix::{matmul_nt, orthonormalize, sym_eig, DenseMatrix, LinalgError};
use lowrank_core::rng::gaussian_matrix;
use lowrank_core::statcheck::{cubic_scale, ks_critical_value, ks_vs_normal, projected_sketch_samples, StatError};
use lowrank_core::{FarpcaConfig, FarpcaError, SketchSpec};
use serde::Serialize;

/// Which unit row `u` is projected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowChoice {
    /// A row of a Haar orthogonal matrix, drawn as a normalized Gaussian
    /// vector (the two have the same law). Entries are `O(√(log n / n))`.
    Haar,
    /// `e₁`, a row of the identity: one entry of size one.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub n: usize,
    pub statistic: f64,
    /// `Σ_k |u_k|³`.
    pub bound_scale: f64,
    /// `statistic / bound_scale`.
    pub ratio: f64,
    /// KS critical value at the 5% level for the replicate count.
    pub critical: f64,
}

pub fn unit_row(choice: RowChoice, n: usize, seed: u64) -> Result<Vec<f64>, LinalgError> {
    match choice {
        RowChoice::Haar => Ok(orthonormalize(&gaussian_matrix(n, 1, seed, 0x4AA2 + n as u64))?.into_vec()),
        RowChoice::Identity => {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            Ok(e)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Farpca(#[from] FarpcaError),
}

/// Kolmogorov distance between the projected samples `u·ω` and `N(0, 1)`
/// for each dimension in `ns`.
pub fn ks_ladder(spec: &SketchSpec, ns: &[usize], reps: usize, choice: RowChoice) -> Result<Vec<LadderPoint>, StudyError> {
    ns.iter()
        .map(|&n| {
            let u = unit_row(choice, n, spec.seed)?;
            let samples = projected_sketch_samples(&u, spec, reps)?;
            let rep = ks_vs_normal(&samples)?;
            let scale = cubic_scale(&u);
            Ok(LadderPoint {
                n,
                statistic: rep.statistic,
                bound_scale: scale,
                ratio: rep.statistic / scale,
                critical: ks_critical_value(reps, 0.05),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Residual bound holding with probability at least `1 − e^{-u²/2}`.
    pub bound: f64,
    pub trials: usize,
    pub covered: usize,
    /// Observed `‖(I − QQᵀ)A‖_F`, one per trial.
    pub errors: Vec<f64>,
}

impl CoverageReport {
    pub fn rate(&self) -> f64 {
        self.covered as f64 / self.trials.max(1) as f64
    }
}

/// Draws `trials` single-block range finders with `k + h` columns and no
/// power passes and counts how often the large-dimension tail bound with
/// deviation `u` holds. `sigma_desc` is the exact spectrum of `a`. A
/// degenerate draw is redrawn, as in the driver.
pub fn bound_coverage(a: &DenseMatrix, sigma_desc: &[f64], k: usize, h: usize, u: f64, spec: SketchSpec, trials: usize) -> Result<CoverageReport, StudyError> {
    let inputs = BoundInputs::from_spectrum(k, h, 0, sigma_desc).with_probability(u, 1.0);
    let bound = asymptotic_bounds(&inputs)?.frob_prob;
    let mut errors = Vec::with_capacity(trials);
    for trial in 0..trials {
        let cfg = FarpcaConfig {
            tolerance: 0.0,
            relative: false,
            power: 0,
            block: k + h,
            sketch: SketchSpec {
                seed: spec.seed.wrapping_add(trial as u64),
                ..spec
            },
            max_iters: 1,
            shift_convention: Default::default(),
            whitening: Default::default(),
            max_retries: 3,
        };
        let out = accumulate(a, &cfg, StopRule::Rank { l: k + h })?;
        errors.push(out.state.residual_sq().max(0.0).sqrt());
    }
    let covered = errors.iter().filter(|&&e| e <= bound).count();
    Ok(CoverageReport { bound, trials, covered, errors })
}

/// Classical and large-dimension bounds side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTable {
    pub frob_expected: [f64; 2],
    pub spec_expected: [f64; 2],
    pub frob_prob: [f64; 2],
    pub spec_prob: [f64; 2],
    pub failure_probability: [f64; 2],
}

/// `[classical, asymptotic]` pairs; a classical entry is `NaN` where its
/// preconditions fail (`h ≥ 2` for expectations, `h ≥ 4` and `u, t ≥ 1`
/// for the tail bounds).
pub fn bound_table(inputs: &BoundInputs) -> Result<BoundTable, BoundsError> {
    let asy = asymptotic_bounds(inputs)?;
    let cls = classical_bounds(inputs).ok();
    let expected = classical_expected(inputs).ok();
    let pick = |f: fn(&lowrank_core::bounds::ErrorBounds) -> f64| [cls.as_ref().map_or(f64::NAN, f), f(&asy)];
    Ok(BoundTable {
        frob_expected: [expected.map_or(f64::NAN, |e| e.0), asy.frob_expected],
        spec_expected: [expected.map_or(f64::NAN, |e| e.1), asy.spec_expected],
        frob_prob: pick(|b| b.frob_prob),
        spec_prob: pick(|b| b.spec_prob),
        failure_probability: pick(|b| b.failure_probability),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PinvReport {
    pub m: usize,
    pub n: usize,
    pub draws: usize,
    /// Monte Carlo mean of `‖G†‖²_F`.
    pub mean_frob_sq: f64,
    /// `‖G†‖` per draw.
    pub spectral: Vec<f64>,
    /// Limit of `‖G†‖_F`.
    pub frob_limit: f64,
    /// Upper bound on the limit of `‖G†‖`.
    pub spec_limit: f64,
    /// `γ ∫ x⁻¹ dμ_MP`, the limit of `‖G†‖²_F` by quadrature.
    pub frob_sq_by_quadrature: f64,
}

/// Pseudo-inverse norms of `draws` standard Gaussian `m x n` matrices,
/// `m < n`, read off the eigenvalues of `GGᵀ`.
pub fn pinv_monte_carlo(m: usize, n: usize, draws: usize, seed: u64) -> Result<PinvReport, StudyError> {
    let limits = pinv_norm_asymptotics(m, n)?;
    let mut frob = 0.0;
    let mut spectral = Vec::with_capacity(draws);
    for d in 0..draws {
        let g = gaussian_matrix(m, n, seed, 0x9170 + d as u64);
        let mut ggt = matmul_nt(&g, &g)?;
        ggt.symmetrize();
        let eig = sym_eig(&ggt)?;
        frob += eig.values.iter().map(|l| 1.0 / l).sum::<f64>();
        spectral.push(1.0 / eig.values[0].sqrt());
    }
    let gamma = m as f64 / n as f64;
    let law = MpLaw::new(gamma, 1.0)?;
    let frob_sq_by_quadrature = gamma * law.integrate(|x| 1.0 / x, 1e-12);
    Ok(PinvReport {
        m,
        n,
        draws,
        mean_frob_sq: frob / draws.max(1) as f64,
        spectral,
        frob_limit: limits.frob_limit,
        spec_limit: limits.spec_upper_bound,
        frob_sq_by_quadrature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lowrank_core::SketchKind;

    #[test]
    fn haar_row_is_unit_and_delocalized() {
        let u = unit_row(RowChoice::Haar, 1024, 3).unwrap();
        assert!((u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(u.iter().all(|x| x.abs() < 0.2));
        assert_eq!(cubic_scale(&unit_row(RowChoice::Identity, 8, 0).unwrap()), 1.0);
    }

    #[test]
    fn identity_row_violation_is_detected() {
        let spec = SketchSpec::new(SketchKind::SparseSign, 0.01, 1).unwrap();
        let pts = ks_ladder(&spec, &[64], 20_000, RowChoice::Identity).unwrap();
        assert!(pts[0].statistic > 0.4);
    }

    #[test]
    fn quadrature_matches_closed_form_limit() {
        let rep = pinv_monte_carlo(20, 60, 3, 1).unwrap();
        let want = rep.frob_limit * rep.frob_limit;
        assert!((rep.frob_sq_by_quadrature - want).abs() < 1e-6 * want);
    }

    #[test]
    fn small_coverage_run() {
        let n = 120;
        let sigma: Vec<f64> = (1..=n).map(|j| (-(j as f64) / 20.0).exp()).collect();
        let mut u = orthonormalize(&gaussian_matrix(n, n, 1, 1)).unwrap();
        let v = orthonormalize(&gaussian_matrix(n, n, 1, 2)).unwrap();
        u.scale_cols(&sigma);
        let a = matmul_nt(&u, &v).unwrap();
        let rep = bound_coverage(&a, &sigma, 10, 5, 3.0, SketchSpec::gaussian(4), 20).unwrap();
        assert_eq!(rep.errors.len(), 20);
        assert!(rep.covered >= 19);
    }

    #[test]
    fn table_marks_missing_classical_values() {
        let sigma: Vec<f64> = (1..=50).map(|j| 1.0 / j as f64).collect();
        let t = bound_table(&BoundInputs::from_spectrum(5, 2, 0, &sigma)).unwrap();
        assert!(t.frob_prob[0].is_nan() && t.frob_prob[1].is_finite());
        assert!(t.frob_expected[0].is_finite());
    }
}
