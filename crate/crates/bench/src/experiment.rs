//! Grid runner: loads matrices, expands a parameter grid into runs,
//! executes them on a worker pool and collects an [`ExperimentReport`].

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use lowrank_core::farpca::{accumulate, assemble_svd_with, keep_largest, truncate_to_tolerance, StopRule};
use lowrank_core::{DenseMatrix, FarpcaConfig, FarpcaError, ShiftConvention, SketchKind, SketchSpec};
use serde::Deserialize;

use crate::io::{load_matrix, IoError, MatrixFormat};
use crate::report::{read_reference_csv, ExperimentReport, ReportError, RunExtra, RunRecord};
use crate::synthetic::{SyntheticError, SyntheticFactors, SyntheticKind, SyntheticSpec, DEFAULT_MEMORY_CAP};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("matrix {name}: {source}")]
    Matrix { name: String, source: IoError },
    #[error("matrix {name}: {source}")]
    Synthetic { name: String, source: SyntheticError },
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_))
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// A sketch density, either literal or a rule evaluated per matrix.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Density {
    Value(f64),
    /// `"default"`, `"ln(n)/n"` or `"10/n"`; each is floored at `1e-3`
    /// except `"ln(n)/n"`, which is taken as is.
    Rule(String),
}

impl Density {
    pub fn resolve(&self, kind: SketchKind, m: usize, n: usize) -> Result<f64, ExperimentError> {
        let nf = n as f64;
        match self {
            Self::Value(p) => Ok(*p),
            Self::Rule(r) => match r.replace(' ', "").as_str() {
                "default" => Ok(kind.default_p(m, n)),
                "ln(n)/n" => Ok(nf.ln() / nf),
                "10/n" => Ok((10.0 / nf).max(1e-3)),
                other => Err(config_err(format!("unknown density rule {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub name: Option<String>,
    /// Synthetic generator; mutually exclusive with `path`.
    pub kind: Option<SyntheticKind>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
    pub path: Option<PathBuf>,
    /// `mm`, `raw` or `ppm`; inferred from the extension when absent.
    pub format: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Sketch kind labels.
    #[serde(default)]
    pub algorithms: Vec<String>,
    /// Densities; empty means each kind's default.
    #[serde(default)]
    pub p: Vec<Density>,
    #[serde(default = "default_power")]
    pub power: Vec<u32>,
    /// Block sizes; empty means the size-dependent default.
    #[serde(default)]
    pub block: Vec<usize>,
    /// Fixed-precision tolerances.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Fixed-rank targets; when non-empty the grid runs in fixed-rank mode
    /// and `eps` is ignored.
    #[serde(default)]
    pub ranks: Vec<usize>,
    #[serde(default = "yes")]
    pub relative: bool,
    /// Truncate fixed-precision results to the lowest satisfying rank.
    #[serde(default)]
    pub truncate: bool,
    pub max_iters: Option<usize>,
    /// `"last"` (default) or `"first"`.
    pub shift: Option<String>,
}

fn default_power() -> Vec<u32> {
    vec![1]
}

fn yes() -> bool {
    true
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            algorithms: Vec::new(),
            p: Vec::new(),
            power: default_power(),
            block: Vec::new(),
            eps: Vec::new(),
            ranks: Vec::new(),
            relative: true,
            truncate: false,
            max_iters: None,
            shift: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "one")]
    pub trials: usize,
    /// Trial `i` uses sketch seed `seed + i`, shared across the grid so
    /// that variants are compared on paired draws.
    #[serde(default)]
    pub seed: u64,
    pub memory_cap_mb: Option<u64>,
    /// Measure the error by forming the residual instead of trusting the
    /// indicator.
    #[serde(default = "yes")]
    pub verify_error: bool,
    /// Skip assembly: rank and error come from the accumulated state alone.
    #[serde(default)]
    pub indicator_only: bool,
    #[serde(default)]
    pub matrices: Vec<MatrixEntry>,
    #[serde(default)]
    pub grid: Grid,
    /// External result tables merged into the report.
    #[serde(default)]
    pub references: Vec<PathBuf>,
}

fn one() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            trials: 1,
            seed: 0,
            memory_cap_mb: None,
            verify_error: true,
            indicator_only: false,
            matrices: Vec::new(),
            grid: Grid::default(),
            references: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths are resolved against the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for m in &mut cfg.matrices {
            if let Some(p) = &m.path {
                if p.is_relative() {
                    m.path = Some(base.join(p));
                }
            }
        }
        for r in &mut cfg.references {
            if r.is_relative() {
                *r = base.join(&*r);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.workers == 0 {
            return Err(config_err("workers must be at least 1"));
        }
        for a in &self.grid.algorithms {
            if SketchKind::from_label(a).is_none() {
                return Err(config_err(format!("unknown algorithm {a:?}")));
            }
        }
        if self.grid.block.contains(&0) {
            return Err(config_err("block sizes must be positive"));
        }
        if self.grid.max_iters == Some(0) {
            return Err(config_err("max_iters must be positive"));
        }
        if self.grid.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(config_err("tolerances must be positive"));
        }
        if self.grid.ranks.contains(&0) {
            return Err(config_err("ranks must be positive"));
        }
        if self.grid.ranks.is_empty() && self.grid.eps.is_empty() && !self.grid.algorithms.is_empty() {
            return Err(config_err("grid needs `eps` (fixed precision) or `ranks` (fixed rank)"));
        }
        for p in &self.grid.p {
            match p {
                Density::Value(v) if !(*v > 0.0 && *v <= 1.0) => return Err(config_err(format!("density {v} outside (0, 1]"))),
                Density::Rule(_) => {
                    p.resolve(SketchKind::SparseSign, 100, 100)?;
                }
                _ => {}
            }
        }
        self.shift_convention()?;
        for (i, m) in self.matrices.iter().enumerate() {
            match (&m.kind, &m.path) {
                (Some(_), None) if m.n.is_some() => {}
                (None, Some(_)) => {
                    if let Some(f) = &m.format {
                        MatrixFormat::from_label(f).ok_or_else(|| config_err(format!("matrix {i}: unknown format {f:?}")))?;
                    }
                }
                _ => return Err(config_err(format!("matrix {i}: give either `kind` and `n`, or `path`"))),
            }
        }
        Ok(())
    }

    fn shift_convention(&self) -> Result<ShiftConvention, ExperimentError> {
        match self.grid.shift.as_deref() {
            None | Some("last") => Ok(ShiftConvention::LastDiagonal),
            Some("first") => Ok(ShiftConvention::FirstDiagonal),
            Some(s) => Err(config_err(format!("unknown shift convention {s:?}"))),
        }
    }

    fn memory_cap(&self) -> u64 {
        self.memory_cap_mb.map_or(DEFAULT_MEMORY_CAP, |mb| mb << 20)
    }
}

/// An input matrix with its cached Frobenius norm.
#[derive(Debug, Clone)]
pub struct NamedMatrix {
    pub name: String,
    pub a: DenseMatrix,
    pub norm: f64,
}

impl NamedMatrix {
    pub fn new(name: impl Into<String>, a: DenseMatrix) -> Self {
        let norm = a.frob_norm();
        Self { name: name.into(), a, norm }
    }
}

/// Loads or generates every matrix in `cfg`. Synthetic matrices that share
/// `(n, d, seed)` reuse one pair of orthogonal factors.
pub fn load_matrices(cfg: &ExperimentConfig) -> Result<Vec<NamedMatrix>, ExperimentError> {
    let mut factors: HashMap<(usize, usize, u64), SyntheticFactors> = HashMap::new();
    let mut out = Vec::with_capacity(cfg.matrices.len());
    for (i, m) in cfg.matrices.iter().enumerate() {
        if let (Some(kind), Some(n)) = (m.kind, m.n) {
            let spec = SyntheticSpec {
                kind,
                n,
                d: m.d.unwrap_or(1),
                seed: m.seed.unwrap_or(0),
            };
            let name = m.name.clone().unwrap_or_else(|| format!("{}-{n}", kind.label()));
            let d_eff = if kind == SyntheticKind::BlockVStability { spec.d } else { 1 };
            let key = (n, d_eff, spec.seed);
            let f = match factors.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(SyntheticFactors::new(&spec, cfg.memory_cap()).map_err(|source| ExperimentError::Synthetic {
                    name: name.clone(),
                    source,
                })?),
            };
            let a = f.compose(&kind.spectrum(n)).map_err(|e| ExperimentError::Synthetic {
                name: name.clone(),
                source: e.into(),
            })?;
            out.push(NamedMatrix::new(name, a));
        } else {
            let path = m.path.as_ref().expect("validated");
            let format = match &m.format {
                Some(f) => MatrixFormat::from_label(f),
                None => MatrixFormat::from_path(path),
            }
            .ok_or_else(|| config_err(format!("matrix {i}: cannot infer the format of {}", path.display())))?;
            let name = m.name.clone().unwrap_or_else(|| path.display().to_string());
            let a = load_matrix(path, format).map_err(|source| ExperimentError::Matrix { name: name.clone(), source })?;
            out.push(NamedMatrix::new(name, a));
        }
    }
    Ok(out)
}

/// One cell of the expanded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub id: usize,
    pub matrix: usize,
    pub trial: usize,
    pub config: FarpcaConfig,
    /// Fixed-rank target; `None` in fixed-precision mode.
    pub rank: Option<usize>,
    pub truncate: bool,
}

/// Expands the grid in matrix, algorithm, p, power, block, eps/rank, trial
/// order. Gaussian sketches ignore `p` and run once per remaining cell.
pub fn expand_grid(cfg: &ExperimentConfig, matrices: &[NamedMatrix]) -> Result<Vec<RunSpec>, ExperimentError> {
    let g = &cfg.grid;
    let shift = cfg.shift_convention()?;
    let mut runs = Vec::new();
    let targets: Vec<(Option<usize>, f64)> = if g.ranks.is_empty() {
        g.eps.iter().map(|&e| (None, e)).collect()
    } else {
        g.ranks.iter().map(|&l| (Some(l), 0.0)).collect()
    };
    for (mi, m) in matrices.iter().enumerate() {
        let (rows, cols) = m.a.shape();
        for alg in &g.algorithms {
            let kind = SketchKind::from_label(alg).ok_or_else(|| config_err(format!("unknown algorithm {alg:?}")))?;
            let mut ps = Vec::new();
            if kind == SketchKind::Gaussian {
                ps.push(1.0);
            } else if g.p.is_empty() {
                ps.push(kind.default_p(rows, cols));
            } else {
                for d in &g.p {
                    ps.push(d.resolve(kind, rows, cols)?);
                }
            }
            let blocks = if g.block.is_empty() {
                vec![FarpcaConfig::default_block(rows, cols)]
            } else {
                g.block.clone()
            };
            for &p in &ps {
                for &power in &g.power {
                    for &b in &blocks {
                        for &(rank, eps) in &targets {
                            for trial in 0..cfg.trials {
                                let config = FarpcaConfig {
                                    tolerance: eps,
                                    relative: g.relative,
                                    power,
                                    block: b,
                                    sketch: SketchSpec {
                                        kind,
                                        p,
                                        seed: cfg.seed.wrapping_add(trial as u64),
                                    },
                                    max_iters: g.max_iters.unwrap_or_else(|| FarpcaConfig::default_max_iters(cols, b)),
                                    shift_convention: shift,
                                    whitening: Default::default(),
                                    max_retries: 3,
                                };
                                config.validate().map_err(|e| config_err(format!("{alg}: {e}")))?;
                                runs.push(RunSpec {
                                    id: runs.len(),
                                    matrix: mi,
                                    trial,
                                    config,
                                    rank,
                                    truncate: g.truncate,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(runs)
}

/// Runs one cell. Failures are recorded in the returned record.
pub fn execute(run: &RunSpec, m: &NamedMatrix, verify_error: bool, indicator_only: bool) -> RunRecord {
    let cfg = &run.config;
    let norm_sq = m.norm * m.norm;
    let eps_rel = match run.rank {
        Some(_) => 0.0,
        None if cfg.relative => cfg.tolerance,
        None => cfg.tolerance / m.norm,
    };
    let mut extra = RunExtra {
        matrix: m.name.clone(),
        seed: cfg.sketch.seed,
        trial: run.trial,
        ..RunExtra::default()
    };
    let base = |l: usize, r: usize, err: f64, t: f64, success: bool, extra: RunExtra| RunRecord {
        algorithm: cfg.sketch.kind.label().to_owned(),
        n: m.a.cols(),
        p: cfg.sketch.p,
        power: cfg.power,
        b: cfg.block,
        eps: if run.rank.is_some() { 0.0 } else { cfg.tolerance },
        l,
        r,
        err,
        t,
        success,
        extra,
    };
    let start = Instant::now();
    let (stop, cfg) = match run.rank {
        Some(l) => {
            let rounded = l.div_ceil(cfg.block) * cfg.block;
            let mut c = cfg.clone();
            c.max_iters = c.max_iters.max(rounded / cfg.block);
            (StopRule::Rank { l: rounded }, c)
        }
        None => {
            let tol = lowrank_core::farpca::absolute_tolerance(cfg, norm_sq);
            (StopRule::Residual { tol_sq: tol * tol }, cfg.clone())
        }
    };
    let outcome = match accumulate(&m.a, &cfg, stop) {
        Ok(o) => o,
        Err(e) => {
            extra.failure = Some(e.to_string());
            return base(0, 0, f64::NAN, start.elapsed().as_secs_f64(), false, extra);
        }
    };
    let reached = outcome.reached;
    let rank = outcome.state.rank();
    if indicator_only {
        let err = outcome.state.residual_sq().max(0.0).sqrt() / m.norm;
        if !reached {
            extra.failure = Some(format!("tolerance not reached after {} blocks", outcome.state.blocks()));
        }
        return base(rank, rank, err, start.elapsed().as_secs_f64(), reached, extra);
    }
    let t_asm = Instant::now();
    let svd = match assemble_svd_with(&outcome.state, cfg.whitening) {
        Ok(s) => s,
        Err(e) => {
            extra.failure = Some(FarpcaError::from(e).to_string());
            return base(rank, rank, f64::NAN, start.elapsed().as_secs_f64(), false, extra);
        }
    };
    let svd = match run.rank {
        Some(l) => keep_largest(svd, l),
        None => svd,
    };
    extra.t_assemble = t_asm.elapsed().as_secs_f64();
    let l = svd.rank;
    let t_tr = Instant::now();
    let svd = if run.truncate && run.rank.is_none() { truncate_to_tolerance(&svd, eps_rel, m.norm) } else { svd };
    extra.t_truncate = t_tr.elapsed().as_secs_f64();
    let t = start.elapsed().as_secs_f64();
    let err_sq = if verify_error {
        svd.residual_frob_sq(&m.a).unwrap_or(f64::NAN)
    } else {
        svd.residual_sq
    };
    let err = err_sq.max(0.0).sqrt() / m.norm;
    let success = match run.rank {
        Some(_) => err.is_finite(),
        None => reached && err <= eps_rel * (1.0 + 1e-6),
    };
    if !reached {
        extra.failure = Some(format!("tolerance not reached after {} blocks", svd.blocks));
    }
    base(l, svd.rank, err, t, success, extra)
}

/// Executes `runs` on `workers` threads. Each run owns its state; the
/// calling thread is the single writer of the report, which lists runs
/// in id order regardless of completion order.
pub fn run_grid(runs: &[RunSpec], matrices: &[NamedMatrix], workers: usize, verify_error: bool, indicator_only: bool) -> ExperimentReport {
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<RunRecord>> = vec![None; runs.len()];
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(runs.len().max(1)) {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(run) = runs.get(i) else { break };
                let rec = execute(run, &matrices[run.matrix], verify_error, indicator_only);
                if tx.send((i, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, rec) in rx {
            log::info!("run {i}: {} n={} l={} err={:.3e} t={:.2}s", rec.algorithm, rec.n, rec.l, rec.err, rec.t);
            slots[i] = Some(rec);
        }
    });
    let mut report = ExperimentReport::default();
    for (run, rec) in runs.iter().zip(slots) {
        report.push(rec.expect("every run reports"), run.rank);
    }
    report
}

/// Loads matrices, runs the grid and merges reference tables.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let matrices = load_matrices(cfg)?;
    let runs = expand_grid(cfg, &matrices)?;
    let mut report = run_grid(&runs, &matrices, cfg.workers, cfg.verify_error, cfg.indicator_only);
    for path in &cfg.references {
        let f = std::fs::File::open(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        report.references.extend(read_reference_csv(f)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        trials = 2
        seed = 5
        [[matrices]]
        kind = "slow-decay"
        n = 60
        [[matrices]]
        kind = "fast-decay"
        n = 60
        [grid]
        algorithms = ["gaussian", "sparse-sign"]
        p = [0.2, "ln(n)/n"]
        power = [0, 1]
        block = [5]
        eps = [1e-2]
        truncate = true
        max_iters = 12
    "#;

    #[test]
    fn parses_and_expands() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        let m = load_matrices(&cfg).unwrap();
        let runs = expand_grid(&cfg, &m).unwrap();
        // per matrix: gaussian 1 p, sparse 2 p; 2 powers; 2 trials
        assert_eq!(runs.len(), 2 * (1 + 2) * 2 * 2);
        assert_eq!(runs[0].config.sketch.seed, 5);
        assert_eq!(runs[1].config.sketch.seed, 6);
        assert_eq!(runs[0].config.max_iters, 12);
    }

    #[test]
    fn grid_records_every_run() {
        let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.records.len(), 24);
        for r in &report.records {
            assert!(r.success, "{r:?}");
            assert!(r.err <= 1e-2 && r.r <= r.l, "{r:?}");
            assert!(r.l % 5 == 0);
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let mut cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        let one = run_experiment(&cfg).unwrap();
        cfg.workers = 3;
        let three = run_experiment(&cfg).unwrap();
        let strip = |r: &ExperimentReport| r.records.iter().map(|x| (x.algorithm.clone(), x.l, x.r, x.err.to_bits())).collect::<Vec<_>>();
        assert_eq!(strip(&one), strip(&three));
    }

    #[test]
    fn fixed_rank_mode() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [[matrices]]
            kind = "slow-decay"
            n = 50
            [grid]
            algorithms = ["std-bernoulli"]
            ranks = [7, 10]
            block = [5]
            "#,
        )
        .unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.records.iter().map(|r| r.l).collect::<Vec<_>>(), vec![7, 10]);
        assert_eq!(report.targets, vec![Some(7), Some(10)]);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [[matrices]]
            kind = "slow-decay"
            n = 80
            [grid]
            algorithms = ["gaussian"]
            block = [2]
            eps = [1e-6]
            max_iters = 2
            "#,
        )
        .unwrap();
        let report = run_experiment(&cfg).unwrap();
        let r = &report.records[0];
        assert!(!r.success && r.l == 4);
        assert!(r.extra.failure.as_deref().unwrap().contains("not reached"));
    }

    #[test]
    fn empty_grid_is_an_empty_report() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert!(run_experiment(&cfg).unwrap().records.is_empty());
        let cfg = ExperimentConfig::from_toml("[[matrices]]\nkind = \"fast-decay\"\nn = 10\n[grid]\nalgorithms = []\n").unwrap();
        assert!(run_experiment(&cfg).unwrap().records.is_empty());
    }

    #[test]
    fn config_errors() {
        for bad in [
            "workers = 0",
            "[grid]\nalgorithms = [\"dct\"]\neps = [1e-3]",
            "[grid]\nalgorithms = [\"gaussian\"]",
            "[grid]\nalgorithms = [\"gaussian\"]\neps = [-1.0]",
            "[grid]\np = [2.0]",
            "[grid]\np = [\"sqrt(n)\"]",
            "[grid]\nshift = \"middle\"",
            "[[matrices]]\nkind = \"slow-decay\"",
            "[[matrices]]\npath = \"a.mtx\"\nformat = \"xls\"",
            "unknown_key = 1",
        ] {
            let err = ExperimentConfig::from_toml(bad).unwrap_err();
            assert!(err.is_config(), "{bad}: {err}");
        }
    }

    #[test]
    fn density_rules() {
        let d = Density::Rule("ln(n)/n".into());
        assert!((d.resolve(SketchKind::SparseSign, 5000, 5000).unwrap() - 5000f64.ln() / 5000.0).abs() < 1e-15);
        assert_eq!(Density::Rule("10/n".into()).resolve(SketchKind::Bernoulli, 1, 100_000).unwrap(), 1e-3);
    }
}
