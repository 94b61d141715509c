//! Blocked adaptive low-rank factorization.
//!
//! Each block draws a test matrix, optionally runs deflated (shifted) power
//! passes on it, and appends `Y_j = A G_j`, `W_j = Aᵀ Y_j` to the history.
//! The history keeps `Z = YᵀY` through a bordered Cholesky factor `L` and
//! the matrix `X = W L⁻ᵀ`, so that `tr(T Z⁻¹) = ‖X‖²_F` and the deflation
//! `W Z⁻¹ Wᵀ G` equals `X (Xᵀ G)`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::fmath;
use crate::matrix::{
    eig_svd_with_tol, gemm, matmul, matmul_tn, sym_eig, Cholesky, DenseMatrix, LinalgError, Transpose,
};
use crate::sketch::{
    apply_block, centering_column, dense_t_sparse_mul, gen_sketch, SketchBlock, SketchError, SketchKind, SketchSpec,
};

/// Block ids of redrawn sketches are offset by multiples of this.
pub const RETRY_BLOCK_OFFSET: u64 = 1000;
/// Below this relative size an assembled singular value is flagged.
pub const SIGMA_FLAG_TOL: f64 = 1e-14;
/// Absolute tolerances at or below this multiple of `‖A‖_F` are beyond
/// what the error indicator resolves in double precision.
pub const INDICATOR_FLOOR: f64 = 2.1e-7;

/// Which diagonal entry of the ascending `Σ̂` drives the shift update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftConvention {
    /// `Σ̂(b,b)`: the largest singular value of the iterate.
    #[default]
    LastDiagonal,
    /// `Σ̂(1,1)`: the smallest singular value of the iterate.
    FirstDiagonal,
}

/// How the whitening factor `D` with `DᵀZD = I` is formed at assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Whitening {
    /// `D = V̂ Ŝ^{-1/2}` from an eigendecomposition of `Z`.
    Eigen,
    /// `D = L⁻ᵀ` from the maintained Cholesky factor of `Z`.
    #[default]
    Cholesky,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarpcaConfig {
    /// `ε`; absolute Frobenius tolerance, or relative to `‖A‖_F` when
    /// `relative` is set. Unused in fixed-rank mode.
    pub tolerance: f64,
    pub relative: bool,
    pub power: u32,
    pub block: usize,
    pub sketch: SketchSpec,
    /// Maximum number of accepted blocks.
    pub max_iters: usize,
    pub shift_convention: ShiftConvention,
    pub whitening: Whitening,
    /// Redraws allowed per block after a degenerate sketch.
    pub max_retries: u32,
}

impl FarpcaConfig {
    /// `min(max(20, ⌊min(m,n)/100⌋), 50)`, capped by `min(m, n)`.
    pub fn default_block(m: usize, n: usize) -> usize {
        let small = m.min(n);
        (small / 100).clamp(20, 50).min(small).max(1)
    }

    /// `⌈n / (2b)⌉`.
    pub fn default_max_iters(n: usize, b: usize) -> usize {
        n.div_ceil(2 * b).max(1)
    }

    /// Defaults for an `m x n` input: relative tolerance, `P = 1`, default
    /// block, density and iteration cap.
    pub fn recommended(m: usize, n: usize, kind: SketchKind, tolerance: f64, seed: u64) -> Self {
        let block = Self::default_block(m, n);
        Self {
            tolerance,
            relative: true,
            power: 1,
            block,
            sketch: SketchSpec {
                kind,
                p: kind.default_p(m, n),
                seed,
            },
            max_iters: Self::default_max_iters(n, block),
            shift_convention: ShiftConvention::default(),
            whitening: Whitening::default(),
            max_retries: 3,
        }
    }

    pub fn validate(&self) -> Result<(), FarpcaError> {
        if self.block == 0 {
            return Err(FarpcaError::InvalidConfig("block size must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(FarpcaError::InvalidConfig("max_iters must be at least 1"));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(FarpcaError::InvalidConfig("tolerance must be finite and non-negative"));
        }
        self.sketch.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FarpcaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("block {block} stayed degenerate after {attempts} draws: {cause}")]
    BlockDegenerate {
        block: usize,
        attempts: u32,
        cause: LinalgError,
    },
    #[error("tolerance not reached after {} blocks (residual² {:e})", .0.blocks, .0.residual_sq)]
    ToleranceNotReached(Box<ApproxSvd>),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `A ≈ U diag(σ) Vᵀ` with `σ` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    /// Number of columns of `u`.
    pub rank: usize,
    /// `E`, the squared Frobenius residual estimate.
    pub residual_sq: f64,
    /// Accepted blocks.
    pub blocks: usize,
    /// Indices of singular values below `SIGMA_FLAG_TOL · max σ`, whose
    /// `v` columns were scaled by that floor instead.
    pub flagged: Vec<usize>,
}

impl ApproxSvd {
    /// Singular values in descending order.
    pub fn sigma_desc(&self) -> Vec<f64> {
        self.sigma.iter().rev().copied().collect()
    }

    pub fn empty(m: usize, n: usize, residual_sq: f64) -> Self {
        Self {
            u: DenseMatrix::zeros(m, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(n, 0),
            rank: 0,
            residual_sq,
            blocks: 0,
            flagged: Vec::new(),
        }
    }

    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        us.scale_cols(&self.sigma);
        let mut out = DenseMatrix::zeros(self.u.rows(), self.v.rows());
        gemm(1.0, &us, Transpose::No, &self.v, Transpose::Yes, 0.0, &mut out).expect("factor shapes agree");
        out
    }

    /// `‖A − U diag(σ) Vᵀ‖²_F`, formed explicitly a slab of columns at a time.
    pub fn residual_frob_sq(&self, a: &DenseMatrix) -> Result<f64, LinalgError> {
        const SLAB: usize = 256;
        if a.rows() != self.u.rows() || a.cols() != self.v.rows() {
            return Err(LinalgError::DimensionMismatch {
                op: "residual_frob_sq",
                left: a.shape(),
                right: (self.u.rows(), self.v.rows()),
            });
        }
        let mut us = self.u.clone();
        us.scale_cols(&self.sigma);
        let vt = self.v.transpose();
        let mut total = 0.0;
        let mut start = 0;
        while start < a.cols() {
            let end = (start + SLAB).min(a.cols());
            let mut r = a.columns(start..end);
            gemm(-1.0, &us, Transpose::No, &vt.columns(start..end), Transpose::No, 1.0, &mut r)?;
            total += r.frob_norm_sq();
            start = end;
        }
        Ok(total)
    }
}

/// Accepted history of one factorization run.
#[derive(Debug, Clone)]
pub struct FactorState {
    y: DenseMatrix,
    w: DenseMatrix,
    z: DenseMatrix,
    t: DenseMatrix,
    chol: Cholesky,
    x: DenseMatrix,
    norm_sq: f64,
    captured: f64,
    alpha: f64,
    blocks: usize,
}

impl FactorState {
    pub fn new(a: &DenseMatrix) -> Self {
        let (m, n) = a.shape();
        Self {
            y: DenseMatrix::zeros(m, 0),
            w: DenseMatrix::zeros(n, 0),
            z: DenseMatrix::zeros(0, 0),
            t: DenseMatrix::zeros(0, 0),
            chol: Cholesky::empty(),
            x: DenseMatrix::zeros(n, 0),
            norm_sq: a.frob_norm_sq(),
            captured: 0.0,
            alpha: 0.0,
            blocks: 0,
        }
    }

    /// `E = ‖A‖²_F − tr(T Z⁻¹)`.
    pub fn residual_sq(&self) -> f64 {
        self.norm_sq - self.captured
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn rank(&self) -> usize {
        self.y.cols()
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Shift reached in the most recent block.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    pub fn t(&self) -> &DenseMatrix {
        &self.t
    }

    /// `tr(T Z⁻¹)` by a fresh Cholesky solve, independent of the running value.
    pub fn trace_tz_inv(&self) -> Result<f64, LinalgError> {
        if self.rank() == 0 {
            return Ok(0.0);
        }
        self.chol.trace_of_product(&self.t)
    }
}

/// Result of the power passes on one block.
#[derive(Debug, Clone)]
pub struct PowerIterate {
    /// Orthonormal `n x b` iterate, or `None` when no pass ran.
    pub basis: Option<DenseMatrix>,
    pub alpha: f64,
}

fn degenerate(e: LinalgError) -> bool {
    matches!(e, LinalgError::RankDeficient { .. })
}

/// `Aᵀ (A G) − X (Xᵀ G) − α G` given `ag = A G` and `xtg = Xᵀ G`.
fn deflated(state: &FactorState, a: &DenseMatrix, ag: &DenseMatrix, xtg: Option<DenseMatrix>, shift: Option<(f64, &DenseMatrix)>) -> Result<DenseMatrix, LinalgError> {
    let mut w = matmul_tn(a, ag)?;
    if let Some(xtg) = xtg {
        gemm(-1.0, &state.x, Transpose::No, &xtg, Transpose::No, 1.0, &mut w)?;
    }
    if let Some((alpha, g)) = shift {
        if alpha != 0.0 {
            w.axpy(-alpha, g)?;
        }
    }
    Ok(w)
}

/// `Xᵀ · block`, centered (unscaled) for standardized Bernoulli blocks.
fn history_times_block(state: &FactorState, block: &SketchBlock) -> Result<Option<DenseMatrix>, LinalgError> {
    if state.rank() == 0 {
        return Ok(None);
    }
    Ok(Some(match block {
        SketchBlock::Dense(g) => matmul_tn(&state.x, g)?,
        SketchBlock::Sparse(s) => dense_t_sparse_mul(&state.x, s)?,
        SketchBlock::Centered { pattern, p } => {
            let mut xb = dense_t_sparse_mul(&state.x, pattern)?;
            // Xᵀ w with w = p 1
            let xw: Vec<f64> = (0..state.x.cols()).map(|i| p * state.x.col(i).iter().sum::<f64>()).collect();
            for c in 0..xb.cols() {
                xb.col_mut(c).iter_mut().zip(&xw).for_each(|(v, s)| *v -= s);
            }
            xb
        }
    }))
}

/// Runs `power` deflated passes on `block`; the first pass consumes the raw
/// (possibly sparse or centered) block, later passes the dense iterate.
pub fn power_iterate_block(
    state: &FactorState,
    a: &DenseMatrix,
    block: &SketchBlock,
    centering: Option<&[f64]>,
    power: u32,
    shift: ShiftConvention,
) -> Result<PowerIterate, LinalgError> {
    let mut alpha = 0.0;
    if power == 0 {
        return Ok(PowerIterate { basis: None, alpha });
    }
    let ag = apply_block(a, block, centering)?;
    let w = deflated(state, a, &ag, history_times_block(state, block)?, None)?;
    let mut g = eig_svd_with_tol(&w, 0.0)?.u;
    for _ in 2..=power {
        let ag = matmul(a, &g)?;
        let xtg = if state.rank() > 0 { Some(matmul_tn(&state.x, &g)?) } else { None };
        let w = deflated(state, a, &ag, xtg, Some((alpha, &g)))?;
        let svd = eig_svd_with_tol(&w, 0.0)?;
        let s_hat = match shift {
            ShiftConvention::LastDiagonal => svd.sigma[svd.sigma.len() - 1],
            ShiftConvention::FirstDiagonal => svd.sigma[0],
        };
        if alpha < s_hat {
            alpha = (s_hat + alpha) / 2.0;
        }
        g = svd.u;
    }
    Ok(PowerIterate { basis: Some(g), alpha })
}

/// `Y_j`: `A G_j` for an iterated basis, otherwise the (centered) product
/// with the raw block.
pub fn block_range(a: &DenseMatrix, block: &SketchBlock, iterate: &PowerIterate, centering: Option<&[f64]>) -> Result<DenseMatrix, LinalgError> {
    match &iterate.basis {
        Some(g) => matmul(a, g),
        None => apply_block(a, block, centering),
    }
}

/// Appends `Y_j` and `W_j = Aᵀ Y_j`, bordering `Z`, `T`, `L` and `X`.
pub fn accept_block(state: &FactorState, a: &DenseMatrix, y_j: &DenseMatrix) -> Result<FactorState, LinalgError> {
    let old = state.rank();
    let b = y_j.cols();
    let w_j = matmul_tn(a, y_j)?;
    let z12 = matmul_tn(&state.y, y_j)?;
    let mut z22 = matmul_tn(y_j, y_j)?;
    z22.symmetrize();
    let chol = state.chol.extended(&z12, &z22)?;

    // X₂ = (W_j − X₁ L₂₁ᵀ) L₂₂⁻ᵀ
    let l21 = DenseMatrix::from_fn(b, old, |i, j| chol.factor_l()[(old + i, j)]);
    let mut x2 = w_j.clone();
    if old > 0 {
        gemm(-1.0, &state.x, Transpose::No, &l21, Transpose::Yes, 1.0, &mut x2)?;
    }
    chol.right_solve_tail_transposed(old, &mut x2);
    let gained = x2.frob_norm_sq();

    let t12 = matmul_tn(&state.w, &w_j)?;
    let mut t22 = matmul_tn(&w_j, &w_j)?;
    t22.symmetrize();

    let mut next = state.clone();
    next.z = border(&state.z, &z12, &z22);
    next.t = border(&state.t, &t12, &t22);
    next.y.append_cols(y_j)?;
    next.w.append_cols(&w_j)?;
    next.x.append_cols(&x2)?;
    next.chol = chol;
    next.captured += gained;
    next.blocks += 1;
    Ok(next)
}

fn border(m11: &DenseMatrix, m12: &DenseMatrix, m22: &DenseMatrix) -> DenseMatrix {
    let (o, b) = (m11.rows(), m22.rows());
    let mut out = DenseMatrix::zeros(o + b, o + b);
    for j in 0..o {
        out.col_mut(j)[..o].copy_from_slice(m11.col(j));
        for i in 0..b {
            out[(o + i, j)] = m12[(j, i)];
        }
    }
    for j in 0..b {
        out.col_mut(o + j)[..o].copy_from_slice(m12.col(j));
        out.col_mut(o + j)[o..].copy_from_slice(m22.col(j));
    }
    out
}

/// Forms `U`, `σ` (ascending) and `V` from the accepted history.
pub fn assemble_svd(state: &FactorState) -> Result<ApproxSvd, LinalgError> {
    assemble_svd_with(state, Whitening::default())
}

pub fn assemble_svd_with(state: &FactorState, whitening: Whitening) -> Result<ApproxSvd, LinalgError> {
    let l = state.rank();
    let (m, n) = (state.y.rows(), state.w.rows());
    if l == 0 {
        return Ok(ApproxSvd::empty(m, n, state.residual_sq()));
    }
    // D with DᵀZD = I, and M = DᵀTD.
    let (d, mut core) = match whitening {
        Whitening::Eigen => {
            let ez = sym_eig(&state.z)?;
            if let Some(index) = ez.values.iter().position(|&s| !(s > 0.0)) {
                return Err(LinalgError::RankDeficient {
                    index,
                    ratio: ez.values[index] / ez.values[l - 1],
                });
            }
            let mut d = ez.vectors;
            let scale: Vec<f64> = ez.values.iter().map(|&s| 1.0 / fmath::sqrt(s)).collect();
            d.scale_cols(&scale);
            let td = matmul(&state.t, &d)?;
            let core = matmul_tn(&d, &td)?;
            (d, core)
        }
        Whitening::Cholesky => {
            let mut d = DenseMatrix::identity(l);
            state.chol.backward_in_place(&mut d);
            (d, matmul_tn(&state.x, &state.x)?)
        }
    };
    core.symmetrize();
    let ec = sym_eig(&core)?;
    let sigma: Vec<f64> = ec.values.iter().map(|&s| fmath::sqrt(s.max(0.0))).collect();
    let dv = matmul(&d, &ec.vectors)?;
    let u = matmul(&state.y, &dv)?;

    let top = sigma[l - 1];
    let floor = SIGMA_FLAG_TOL * top;
    let mut flagged = Vec::new();
    let inv: Vec<f64> = sigma
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s < floor || s == 0.0 {
                flagged.push(i);
                if floor > 0.0 { 1.0 / floor } else { 0.0 }
            } else {
                1.0 / s
            }
        })
        .collect();
    let mut v = match whitening {
        Whitening::Eigen => matmul(&state.w, &dv)?,
        Whitening::Cholesky => matmul(&state.x, &ec.vectors)?,
    };
    v.scale_cols(&inv);
    Ok(ApproxSvd {
        u,
        sigma,
        v,
        rank: l,
        residual_sq: state.residual_sq(),
        blocks: state.blocks,
        flagged,
    })
}

/// When a run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once `E ≤ tol²` (absolute squared threshold).
    Residual { tol_sq: f64 },
    /// Stop after exactly this many columns.
    Rank { l: usize },
}

/// A finished (or abandoned) accumulation.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: FactorState,
    /// Whether the stop rule was met within the iteration cap.
    pub reached: bool,
}

/// Absolute tolerance implied by `cfg` for a matrix with `‖A‖²_F = norm_sq`.
pub fn absolute_tolerance(cfg: &FarpcaConfig, norm_sq: f64) -> f64 {
    if cfg.relative {
        cfg.tolerance * fmath::sqrt(norm_sq)
    } else {
        cfg.tolerance
    }
}

fn next_block(state: &FactorState, a: &DenseMatrix, cfg: &FarpcaConfig, cols: usize, centering: Option<&[f64]>) -> Result<FactorState, FarpcaError> {
    let j = state.blocks as u64;
    let mut last = None;
    for attempt in 0..=cfg.max_retries {
        let block_id = j + RETRY_BLOCK_OFFSET * attempt as u64;
        let block = gen_sketch(&cfg.sketch, a.cols(), cols, block_id)?;
        let attempt_result = power_iterate_block(state, a, &block, centering, cfg.power, cfg.shift_convention).and_then(|it| {
            let y_j = block_range(a, &block, &it, centering)?;
            let mut next = accept_block(state, a, &y_j)?;
            next.alpha = it.alpha;
            Ok(next)
        });
        match attempt_result {
            Ok(next) => return Ok(next),
            Err(e) if degenerate(e.clone()) => {
                log::debug!("block {j} attempt {attempt} degenerate: {e}");
                last = Some(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(FarpcaError::BlockDegenerate {
        block: state.blocks,
        attempts: cfg.max_retries + 1,
        cause: last.expect("at least one attempt ran"),
    })
}

/// Accumulates blocks until `stop` holds, the iteration cap is hit, or the
/// column budget `min(m, n)` is exhausted.
pub fn accumulate(a: &DenseMatrix, cfg: &FarpcaConfig, stop: StopRule) -> Result<RunOutcome, FarpcaError> {
    cfg.validate()?;
    let full = a.rows().min(a.cols());
    let centering = match cfg.sketch.kind {
        SketchKind::StdBernoulli => Some(centering_column(a, cfg.sketch.p)),
        _ => None,
    };
    let mut state = FactorState::new(a);
    loop {
        let (done, want) = match stop {
            StopRule::Residual { tol_sq } => (state.residual_sq() <= tol_sq, full),
            StopRule::Rank { l } => (state.rank() >= l, l.min(full)),
        };
        if done {
            return Ok(RunOutcome { state, reached: true });
        }
        let cols = cfg.block.min(want.saturating_sub(state.rank()));
        if state.blocks >= cfg.max_iters || cols == 0 {
            return Ok(RunOutcome { state, reached: false });
        }
        state = next_block(&state, a, cfg, cols, centering.as_deref())?;
    }
}

/// Smallest-rank factorization with `‖A − UΣVᵀ‖_F ≤ ε` (`ε‖A‖_F` in
/// relative mode).
pub fn run_fixed_precision(a: &DenseMatrix, cfg: &FarpcaConfig) -> Result<ApproxSvd, FarpcaError> {
    cfg.validate()?;
    if !(cfg.tolerance > 0.0) {
        return Err(FarpcaError::InvalidConfig("fixed-precision mode needs a positive tolerance"));
    }
    let norm_sq = a.frob_norm_sq();
    let tol = absolute_tolerance(cfg, norm_sq);
    if !cfg.relative && tol <= INDICATOR_FLOOR * fmath::sqrt(norm_sq) {
        log::warn!("tolerance {tol:e} is below the resolvable floor {:e}", INDICATOR_FLOOR * fmath::sqrt(norm_sq));
    }
    let outcome = accumulate(a, cfg, StopRule::Residual { tol_sq: tol * tol })?;
    let svd = assemble_svd_with(&outcome.state, cfg.whitening)?;
    if outcome.reached {
        Ok(svd)
    } else {
        Err(FarpcaError::ToleranceNotReached(Box::new(svd)))
    }
}

/// Factorization with `l` columns: `⌈l/b⌉` blocks, truncated to the `l`
/// largest triplets at assembly.
pub fn run_fixed_rank(a: &DenseMatrix, l: usize, cfg: &FarpcaConfig) -> Result<ApproxSvd, FarpcaError> {
    let rounded = l.div_ceil(cfg.block.max(1)) * cfg.block;
    let mut cfg = cfg.clone();
    cfg.max_iters = cfg.max_iters.max(rounded / cfg.block.max(1));
    let outcome = accumulate(a, &cfg, StopRule::Rank { l: rounded })?;
    let svd = assemble_svd_with(&outcome.state, cfg.whitening)?;
    Ok(keep_largest(svd, l))
}

/// Drops all but the `keep` largest triplets, moving their energy to the residual.
pub fn keep_largest(svd: ApproxSvd, keep: usize) -> ApproxSvd {
    let l = svd.rank;
    if keep >= l {
        return svd;
    }
    let drop = l - keep;
    let dropped: f64 = svd.sigma[..drop].iter().map(|s| s * s).sum();
    ApproxSvd {
        u: svd.u.columns(drop..l),
        sigma: svd.sigma[drop..].to_vec(),
        v: svd.v.columns(drop..l),
        rank: keep,
        residual_sq: svd.residual_sq + dropped,
        blocks: svd.blocks,
        flagged: svd.flagged.iter().filter(|&&i| i >= drop).map(|&i| i - drop).collect(),
    }
}

/// Lowest rank `r` whose truncation keeps `E + Σ_{dropped} σ² ≤ (ε_rel ‖A‖_F)²`.
pub fn truncate_to_tolerance(svd: &ApproxSvd, eps_rel: f64, norm_a: f64) -> ApproxSvd {
    let target = (eps_rel * norm_a) * (eps_rel * norm_a);
    let slack = target * 1e-12;
    let mut acc = svd.residual_sq;
    let mut drop = 0;
    for &s in &svd.sigma {
        if acc + s * s <= target + slack {
            acc += s * s;
            drop += 1;
        } else {
            break;
        }
    }
    keep_largest(svd.clone(), svd.rank - drop)
}

/// Flop estimates for the dense-Gaussian and sparse-sketch variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub dense: f64,
    pub accelerated: f64,
    pub ratio: f64,
}

/// Cost model with unit multiply constant; `p` is ignored for Gaussian
/// sketches, whose accelerated cost equals the dense one.
pub fn estimate_cost(m: usize, n: usize, l: usize, power: u32, b: usize, p: f64, kind: SketchKind) -> CostEstimate {
    let (m, n, l, pw, b) = (m as f64, n as f64, l as f64, power as f64, b as f64);
    let shared = 1.5 * (m + n) * l * l + pw * (2.0 * m * n * l + n * l * l + 2.0 * n * l * b);
    let dense = 2.0 * m * n * l + shared;
    let accelerated = if kind.is_sparse() {
        m * n * l + m * n * l * p + m * fmath::sqrt(n * l) + shared
    } else {
        dense
    };
    CostEstimate {
        dense,
        accelerated,
        ratio: accelerated / dense,
    }
}
