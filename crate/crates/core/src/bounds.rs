//! Closed-form error bounds for randomized range finders, Marchenko–Pastur
//! helpers and pseudo-inverse norm limits of Gaussian matrices.

use alloc::vec::Vec;
use core::f64::consts::{E, PI};

use crate::fmath;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("invalid bound input: {0}")]
    InvalidInput(&'static str),
    #[error("probabilistic bounds need oversampling h >= 4, got {h}")]
    OversamplingTooSmall { h: usize },
    #[error("aspect ratio m/n must be below 1, got {m}x{n}")]
    NotWide { m: usize, n: usize },
}

/// Inputs shared by every bound. `tail` holds `σ_{k+1}, σ_{k+2}, …` in
/// non-increasing order; the sums run over exactly these entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub k: usize,
    pub h: usize,
    pub power: u32,
    pub tail: Vec<f64>,
    pub u: f64,
    pub t: f64,
    /// Set when `tail` is known to be a truncation of the true spectrum, in
    /// which case every bound underestimates.
    pub tail_truncated: bool,
}

impl BoundInputs {
    pub fn new(k: usize, h: usize, power: u32, tail: Vec<f64>) -> Self {
        Self {
            k,
            h,
            power,
            tail,
            u: 1.0,
            t: 1.0,
            tail_truncated: false,
        }
    }

    pub fn with_probability(mut self, u: f64, t: f64) -> Self {
        self.u = u;
        self.t = t;
        self
    }

    /// Inputs from a full descending spectrum.
    pub fn from_spectrum(k: usize, h: usize, power: u32, sigma_desc: &[f64]) -> Self {
        Self::new(k, h, power, sigma_desc.get(k..).unwrap_or(&[]).to_vec())
    }

    fn validate(&self) -> Result<(), BoundsError> {
        if self.k < 2 {
            return Err(BoundsError::InvalidInput("k must be at least 2"));
        }
        if self.h < 2 {
            return Err(BoundsError::InvalidInput("h must be at least 2"));
        }
        if self.tail.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(BoundsError::InvalidInput("tail entries must be finite and non-negative"));
        }
        if self.tail.windows(2).any(|w| w[1] > w[0]) {
            return Err(BoundsError::InvalidInput("tail must be non-increasing"));
        }
        Ok(())
    }

    fn sigma_next(&self) -> f64 {
        self.tail.first().copied().unwrap_or(0.0)
    }

    fn tail_norm(&self) -> f64 {
        fmath::sqrt(self.tail.iter().map(|s| s * s).sum())
    }

    /// `(Σ σ_j^{2(2P+1)})^{1/2}`.
    fn powered_tail_norm(&self) -> f64 {
        let q = 2 * self.power as i32 + 1;
        fmath::sqrt(self.tail.iter().map(|&s| fmath::powi(s, 2 * q)).sum())
    }

    fn q(&self) -> f64 {
        (2 * self.power + 1) as f64
    }
}

/// Frobenius and spectral bounds, in expectation and with probability at
/// least `1 − failure_probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    pub frob_expected: f64,
    pub spec_expected: f64,
    pub frob_prob: f64,
    pub spec_prob: f64,
    pub failure_probability: f64,
}

fn root(x: f64, q: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        fmath::pow(x, 1.0 / q)
    }
}

/// Expected-value Frobenius and spectral bounds for Gaussian sketches
/// (valid for `h >= 2`).
pub fn classical_expected(inp: &BoundInputs) -> Result<(f64, f64), BoundsError> {
    inp.validate()?;
    let (k, h) = (inp.k as f64, inp.h as f64);
    let q = inp.q();
    let s = inp.sigma_next();
    let frob = fmath::sqrt(1.0 + k / (h - 1.0)) * inp.tail_norm();
    let spec = root(
        (1.0 + fmath::sqrt(k / (h - 1.0))) * fmath::pow(s, q) + E * fmath::sqrt(k + h) / h * inp.powered_tail_norm(),
        q,
    );
    Ok((frob, spec))
}

/// All four classical bounds. Probabilistic forms need `h >= 4`, `u, t >= 1`
/// and fail with probability at most `2 t^{−h} + e^{−u²/2}`.
pub fn classical_bounds(inp: &BoundInputs) -> Result<ErrorBounds, BoundsError> {
    let (frob_expected, spec_expected) = classical_expected(inp)?;
    if inp.h < 4 {
        return Err(BoundsError::OversamplingTooSmall { h: inp.h });
    }
    if !(inp.u >= 1.0 && inp.t >= 1.0) {
        return Err(BoundsError::InvalidInput("u and t must be at least 1"));
    }
    let (k, h, u, t) = (inp.k as f64, inp.h as f64, inp.u, inp.t);
    let q = inp.q();
    let s = inp.sigma_next();
    let sq = fmath::pow(s, q);
    let lead = 1.0 + t * fmath::sqrt(3.0 * k / (h + 1.0));
    let c = E * fmath::sqrt(k + h) / (h + 1.0);
    Ok(ErrorBounds {
        frob_expected,
        spec_expected,
        frob_prob: lead * inp.tail_norm() + u * t * c * s,
        spec_prob: root(lead * sq + t * c * inp.powered_tail_norm() + u * t * c * sq, q),
        failure_probability: 2.0 * fmath::pow(t, -h) + fmath::exp(-u * u / 2.0),
    })
}

/// Asymptotic bounds for `k → ∞` with `k/(k+h)` fixed; the probabilistic
/// forms fail with probability at most `e^{−u²/2}` for any `u > 0`.
pub fn asymptotic_bounds(inp: &BoundInputs) -> Result<ErrorBounds, BoundsError> {
    inp.validate()?;
    if !(inp.u > 0.0) {
        return Err(BoundsError::InvalidInput("u must be positive"));
    }
    let (k, h, u) = (inp.k as f64, inp.h as f64, inp.u);
    let q = inp.q();
    let s = inp.sigma_next();
    let sq = fmath::pow(s, q);
    let lead = 1.0 + fmath::sqrt(k / h);
    let c = (fmath::sqrt(k + h) + fmath::sqrt(k)) / h;
    let tail = inp.tail_norm();
    let ptail = inp.powered_tail_norm();
    Ok(ErrorBounds {
        frob_expected: fmath::sqrt(1.0 + k / h) * tail,
        spec_expected: root(lead * sq + c * ptail, q),
        frob_prob: lead * tail + u * c * s,
        spec_prob: root(lead * sq + c * ptail + u * c * sq, q),
        failure_probability: fmath::exp(-u * u / 2.0),
    })
}

/// Large-`n` limits for the pseudo-inverse of an `m x n` standard Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinvLimits {
    pub gamma: f64,
    /// Limit of `‖G†‖_F`.
    pub frob_limit: f64,
    /// Upper bound on the limit of `‖G†‖`; an inequality, not an estimate.
    pub spec_upper_bound: f64,
}

pub fn pinv_norm_asymptotics(m: usize, n: usize) -> Result<PinvLimits, BoundsError> {
    if m == 0 || m >= n {
        return Err(BoundsError::NotWide { m, n });
    }
    let gamma = m as f64 / n as f64;
    let gap = 1.0 - fmath::sqrt(gamma);
    Ok(PinvLimits {
        gamma,
        frob_limit: fmath::sqrt(gamma / (1.0 - gamma)),
        spec_upper_bound: 1.0 / fmath::sqrt(n as f64 * gap * gap),
    })
}

/// Marchenko–Pastur law with ratio `gamma` and variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpLaw {
    pub gamma: f64,
    pub sigma2: f64,
}

impl MpLaw {
    pub fn new(gamma: f64, sigma2: f64) -> Result<Self, BoundsError> {
        if !(gamma > 0.0 && gamma.is_finite() && sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(BoundsError::InvalidInput("gamma and sigma2 must be positive"));
        }
        Ok(Self { gamma, sigma2 })
    }

    pub fn lower_edge(&self) -> f64 {
        let r = 1.0 - fmath::sqrt(self.gamma);
        self.sigma2 * r * r
    }

    pub fn upper_edge(&self) -> f64 {
        let r = 1.0 + fmath::sqrt(self.gamma);
        self.sigma2 * r * r
    }

    /// Atom at zero, present only when `gamma > 1`.
    pub fn point_mass_at_zero(&self) -> f64 {
        if self.gamma > 1.0 {
            1.0 - 1.0 / self.gamma
        } else {
            0.0
        }
    }

    /// `∫ g(x) f(x) dx` over the continuous part, by adaptive Simpson after
    /// the substitution `x = c − r cos θ` that removes the square-root edges.
    pub fn integrate(&self, g: impl Fn(f64) -> f64, tol: f64) -> f64 {
        let (a, b) = (self.lower_edge(), self.upper_edge());
        let (c, r) = ((a + b) / 2.0, (b - a) / 2.0);
        adaptive_simpson(
            |th| {
                let x = c - r * fmath::cos(th);
                if x <= 0.0 {
                    0.0
                } else {
                    g(x) * mp_density(self, x) * r * fmath::sin(th)
                }
            },
            0.0,
            PI,
            tol,
        )
    }
}

/// Continuous density of the law; zero outside `[a, b⁺]`.
pub fn mp_density(law: &MpLaw, x: f64) -> f64 {
    let (a, b) = (law.lower_edge(), law.upper_edge());
    if !(x >= a && x <= b) || x <= 0.0 {
        return 0.0;
    }
    let prod = (b - x) * (x - a);
    if prod <= 0.0 {
        return 0.0;
    }
    fmath::sqrt(prod) / (2.0 * PI * x * law.gamma * law.sigma2)
}

const SIMPSON_MAX_DEPTH: u32 = 50;

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / 2.0;
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || fmath::abs(delta) <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn zero_tail_gives_zero_bounds() {
        let inp = BoundInputs::new(10, 5, 2, vec![0.0; 30]).with_probability(2.0, 2.0);
        let c = classical_bounds(&inp).unwrap();
        let a = asymptotic_bounds(&inp).unwrap();
        for v in [c.frob_expected, c.spec_expected, c.frob_prob, c.spec_prob] {
            assert_eq!(v, 0.0);
        }
        for v in [a.frob_expected, a.spec_expected, a.frob_prob, a.spec_prob] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn frobenius_expected_arithmetic() {
        let inp = BoundInputs::new(20, 21, 0, vec![1.0]);
        let (frob, _) = classical_expected(&inp).unwrap();
        assert!((frob - 2f64.sqrt()).abs() < 1e-15);
        let inp = BoundInputs::new(7, 7, 0, vec![1.0]);
        assert!((asymptotic_bounds(&inp).unwrap().frob_expected - 2f64.sqrt()).abs() < 1e-15);
    }

    /// Direct transcription of the spectral formula at `P = 0`.
    fn spectral_p0(k: f64, h: f64, tail: &[f64]) -> f64 {
        (1.0 + (k / (h - 1.0)).sqrt()) * tail[0] + E * (k + h).sqrt() / h * tail.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    #[test]
    fn spectral_bound_without_power_matches_direct_form() {
        let cases = [(5, 3, vec![0.9, 0.5, 0.1]), (12, 8, vec![2.0, 2.0, 1.0, 0.3]), (3, 6, vec![0.01])];
        for (k, h, tail) in cases {
            let (_, spec) = classical_expected(&BoundInputs::new(k, h, 0, tail.clone())).unwrap();
            let oracle = spectral_p0(k as f64, h as f64, &tail);
            assert!((spec - oracle).abs() < 1e-12 * oracle);
        }
    }

    #[test]
    fn probabilistic_requires_oversampling() {
        let inp = BoundInputs::new(10, 3, 0, vec![1.0]);
        assert!(classical_expected(&inp).is_ok());
        assert_eq!(classical_bounds(&inp), Err(BoundsError::OversamplingTooSmall { h: 3 }));
        let bad = BoundInputs::new(10, 6, 0, vec![1.0]).with_probability(0.5, 1.0);
        assert!(classical_bounds(&bad).is_err());
        assert!(classical_expected(&BoundInputs::new(1, 6, 0, vec![1.0])).is_err());
        assert!(classical_expected(&BoundInputs::new(4, 6, 0, vec![0.5, 1.0])).is_err());
    }

    #[test]
    fn asymptotic_tighter_on_decaying_tail() {
        let sigma: Vec<f64> = (1..=1000).map(|j| (-(j as f64) / 20.0).exp()).collect();
        let inp = BoundInputs::from_spectrum(100, 25, 0, &sigma).with_probability(1.0, 1.0);
        assert!(asymptotic_bounds(&inp).unwrap().frob_expected < classical_bounds(&inp).unwrap().frob_expected);
    }

    #[test]
    fn probabilistic_frobenius_is_linear_in_u() {
        let tail = vec![0.5, 0.25, 0.1];
        let at = |u: f64| asymptotic_bounds(&BoundInputs::new(30, 10, 0, tail.clone()).with_probability(u, 1.0)).unwrap().frob_prob;
        let slope = ((40f64).sqrt() + (30f64).sqrt()) / 10.0 * 0.5;
        assert!(((at(100.0) - at(10.0)) / 90.0 - slope).abs() < 1e-12);
    }

    #[test]
    fn failure_probabilities() {
        let inp = BoundInputs::new(10, 6, 0, vec![1.0]).with_probability(2.0, 3.0);
        let c = classical_bounds(&inp).unwrap();
        assert!((c.failure_probability - (2.0 * 3f64.powi(-6) + (-2f64).exp())).abs() < 1e-15);
        assert!((asymptotic_bounds(&inp).unwrap().failure_probability - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn pinv_limits() {
        let l = pinv_norm_asymptotics(200, 400).unwrap();
        assert!((l.frob_limit - 1.0).abs() < 1e-15);
        let s = 1.0 - 0.5f64.sqrt();
        assert!((l.spec_upper_bound - 1.0 / (400.0 * s * s).sqrt()).abs() < 1e-15);
        assert!(pinv_norm_asymptotics(400, 400).is_err());
        assert!(pinv_norm_asymptotics(500, 400).is_err());
    }

    #[test]
    fn density_values() {
        let law = MpLaw::new(1.0, 1.0).unwrap();
        assert_eq!(mp_density(&law, law.lower_edge()), 0.0);
        assert_eq!(mp_density(&law, law.upper_edge()), 0.0);
        assert!((mp_density(&law, 2.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(mp_density(&law, 5.0), 0.0);
        let law = MpLaw::new(0.3, 2.0).unwrap();
        assert_eq!(mp_density(&law, law.upper_edge()), 0.0);
    }

    #[test]
    fn density_integrates_to_continuous_mass() {
        for (gamma, s2) in [(0.25, 1.0), (0.5, 2.0), (1.0, 1.0), (2.0, 1.0), (4.0, 0.5)] {
            let law = MpLaw::new(gamma, s2).unwrap();
            let mass = law.integrate(|_| 1.0, 1e-8);
            assert!((mass - f64::min(1.0, 1.0 / gamma)).abs() < 1e-6, "gamma {gamma}: {mass}");
            assert!((mass + law.point_mass_at_zero() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn inverse_moment_matches_closed_form() {
        let law = MpLaw::new(0.25, 1.0).unwrap();
        let m = law.integrate(|x| 1.0 / x, 1e-8);
        assert!((m - 4.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn simpson_on_polynomial_is_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
    }

    fn tail_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..2.0, 1..40).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #[test]
        fn asymptotic_frobenius_never_looser(k in 2usize..200, h in 2usize..200, tail in tail_strategy()) {
            let inp = BoundInputs::new(k, h, 0, tail);
            let a = asymptotic_bounds(&inp).unwrap().frob_expected;
            let (c, _) = classical_expected(&inp).unwrap();
            prop_assert!(a <= c);
        }

        #[test]
        fn bounds_non_increasing_in_h(k in 2usize..100, h in 4usize..100, p in 0u32..3, tail in tail_strategy(), u in 1.0f64..5.0, t in 1.0f64..5.0) {
            let lo = BoundInputs::new(k, h, p, tail.clone()).with_probability(u, t);
            let hi = BoundInputs::new(k, h + 1, p, tail).with_probability(u, t);
            let (a, b) = (classical_bounds(&lo).unwrap(), classical_bounds(&hi).unwrap());
            let slack = 1e-12;
            prop_assert!(b.frob_expected <= a.frob_expected * (1.0 + slack));
            prop_assert!(b.spec_expected <= a.spec_expected * (1.0 + slack));
            prop_assert!(b.frob_prob <= a.frob_prob * (1.0 + slack));
            prop_assert!(b.spec_prob <= a.spec_prob * (1.0 + slack));
            let (a, b) = (asymptotic_bounds(&lo).unwrap(), asymptotic_bounds(&hi).unwrap());
            prop_assert!(b.frob_expected <= a.frob_expected * (1.0 + slack));
            prop_assert!(b.spec_expected <= a.spec_expected * (1.0 + slack));
            prop_assert!(b.frob_prob <= a.frob_prob * (1.0 + slack));
            prop_assert!(b.spec_prob <= a.spec_prob * (1.0 + slack));
        }

        #[test]
        fn bounds_non_decreasing_in_tail(k in 2usize..100, h in 4usize..100, p in 0u32..3, tail in tail_strategy(), bump in 0.0f64..1.0) {
            let mut bigger = tail.clone();
            bigger[0] += bump;
            let lo = BoundInputs::new(k, h, p, tail).with_probability(2.0, 2.0);
            let hi = BoundInputs::new(k, h, p, bigger).with_probability(2.0, 2.0);
            for (a, b) in [
                (classical_bounds(&lo).unwrap(), classical_bounds(&hi).unwrap()),
                (asymptotic_bounds(&lo).unwrap(), asymptotic_bounds(&hi).unwrap()),
            ] {
                prop_assert!(a.frob_expected <= b.frob_expected);
                prop_assert!(a.spec_expected <= b.spec_expected * (1.0 + 1e-12));
                prop_assert!(a.frob_prob <= b.frob_prob);
                prop_assert!(a.spec_prob <= b.spec_prob * (1.0 + 1e-12));
            }
        }

        #[test]
        fn power_iteration_sharpens_normalized_tail(k in 2usize..100, h in 2usize..100, p in 0u32..4, tail in tail_strategy()) {
            let top = tail[0].max(1e-300);
            let tail: Vec<f64> = tail.iter().map(|s| s / top.max(1.0)).collect();
            let a = asymptotic_bounds(&BoundInputs::new(k, h, p, tail.clone())).unwrap().spec_expected;
            let b = asymptotic_bounds(&BoundInputs::new(k, h, p + 1, tail)).unwrap().spec_expected;
            prop_assert!(b <= a * (1.0 + 1e-12));
        }
    }
}
