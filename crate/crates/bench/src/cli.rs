//! The `lowrank` command line.
//!
//! Exit codes: 0 on success (including a completed grid), 1 on I/O or
//! numerical failure, 2 on usage or configuration errors, 3 when a single
//! fixed-precision factorization stops before reaching its tolerance.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lowrank_core::bounds::BoundInputs;
use lowrank_core::farpca::{run_fixed_precision, run_fixed_rank, truncate_to_tolerance};
use lowrank_core::{ApproxSvd, DenseMatrix, FarpcaConfig, FarpcaError, SketchKind, SketchSpec};
use serde_json::json;

use crate::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use crate::io::{encode_ppm, load_matrix, save_matrix, MatrixFormat};
use crate::report::read_reference_csv;
use crate::studies::{bound_table, ks_ladder, pinv_monte_carlo, RowChoice};
use crate::synthetic::{gen_synthetic, synthetic_photo, SyntheticKind, SyntheticSpec, DEFAULT_MEMORY_CAP};
use crate::timing::set_deterministic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_REACHED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lowrank", version, about = "Randomized low-rank factorization with sparse sketches")]
struct Cli {
    /// Single-threaded products, so runs are reproducible bit for bit.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Factorize a matrix file to a tolerance or a fixed rank.
    Factorize(FactorizeArgs),
    /// Run an experiment grid described by a TOML file.
    Bench(BenchArgs),
    /// Evaluate the range-finder error bounds for a spectrum.
    Bounds(BoundsArgs),
    /// Kolmogorov distance of projected sketch entries from N(0, 1).
    Statcheck(StatcheckArgs),
    /// Write a synthetic test matrix or image.
    Gen(GenArgs),
}

fn parse_sketch_kind(s: &str) -> Result<SketchKind, String> {
    SketchKind::from_label(s).ok_or_else(|| {
        let all: Vec<&str> = SketchKind::ALL.iter().map(|k| k.label()).collect();
        format!("unknown sketch kind {s:?}; expected one of {}", all.join(", "))
    })
}

fn parse_format(s: &str) -> Result<MatrixFormat, String> {
    MatrixFormat::from_label(s).ok_or_else(|| format!("unknown format {s:?}; expected mm, raw or ppm"))
}

#[derive(Debug, Args)]
struct FactorizeArgs {
    input: PathBuf,
    /// Input format; inferred from the extension when absent.
    #[arg(long, value_parser = parse_format)]
    format: Option<MatrixFormat>,
    #[arg(long, value_parser = parse_sketch_kind, default_value = "std-bernoulli")]
    kind: SketchKind,
    /// Sketch density; defaults to the kind's recommended value.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 1)]
    power: u32,
    #[arg(long)]
    block: Option<usize>,
    /// Frobenius tolerance (fixed-precision mode).
    #[arg(long)]
    eps: Option<f64>,
    /// Read `--eps` relative to the norm of the input.
    #[arg(long)]
    rel: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target rank (fixed-rank mode).
    #[arg(long, conflicts_with = "eps")]
    rank: Option<usize>,
    /// After a fixed-precision run, keep the fewest triplets that still meet `--eps`.
    #[arg(long, requires = "eps")]
    truncate: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Directory receiving `u`, `v` and `sigma.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the written factors.
    #[arg(long, value_parser = parse_format, default_value = "raw")]
    out_format: MatrixFormat,
}

#[derive(Debug, Args)]
struct BenchArgs {
    config: PathBuf,
    /// Report directory.
    #[arg(long, default_value = "report")]
    out: PathBuf,
    /// Extra reference result tables (CSV) to merge.
    #[arg(long)]
    reference: Vec<PathBuf>,
    /// Overrides the worker count from the config.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Target rank.
    #[arg(long)]
    k: usize,
    /// Oversampling.
    #[arg(long)]
    h: usize,
    #[arg(long, default_value_t = 0)]
    power: u32,
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// File of singular values (any whitespace separation, any order).
    #[arg(long, conflicts_with = "kind")]
    sigma: Option<PathBuf>,
    /// Synthetic spectrum: slow-decay or fast-decay.
    #[arg(long, requires = "n")]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Also report pseudo-inverse limits for an `M x N` Gaussian.
    #[arg(long, num_args = 2, value_names = ["M", "N"])]
    pinv: Option<Vec<usize>>,
    /// Monte Carlo draws for `--pinv`.
    #[arg(long, default_value_t = 0)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct StatcheckArgs {
    #[arg(long, value_parser = parse_sketch_kind, default_value = "sparse-sign")]
    kind: SketchKind,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Dimensions to test.
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024,4096")]
    ladder: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Project a row of the identity instead of a delocalized row.
    #[arg(long)]
    violation: bool,
    /// Also write the ladder as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// slow-decay, fast-decay, block-v-stability or photo.
    #[arg(long)]
    kind: String,
    #[arg(long, required_unless_present = "height")]
    n: Option<usize>,
    /// Diagonal blocks of the right factor (block-v-stability).
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Image height for `photo`.
    #[arg(long, requires = "width")]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Output format; inferred from the extension when absent.
    #[arg(long, value_parser = parse_format)]
    format: Option<MatrixFormat>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mem_cap_mb: Option<u64>,
}

/// A failure mapped to an exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn other(message: impl ToString) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.to_string(),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    set_deterministic(cli.deterministic);
    let result = match cli.command {
        Command::Factorize(a) => factorize(a),
        Command::Bench(a) => bench(a),
        Command::Bounds(a) => bounds(a),
        Command::Statcheck(a) => statcheck(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("lowrank: {}", f.message);
            f.code
        }
    }
}

fn resolve_format(path: &Path, given: Option<MatrixFormat>) -> Result<MatrixFormat, Failure> {
    given
        .or_else(|| MatrixFormat::from_path(path))
        .ok_or_else(|| Failure::config(format!("cannot infer the format of {}; pass --format", path.display())))
}

fn write_factors(dir: &Path, svd: &ApproxSvd, format: MatrixFormat) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::other(format!("{}: {e}", dir.display())))?;
    let ext = match format {
        MatrixFormat::MatrixMarketArray => "mtx",
        MatrixFormat::RawF64 => "bin",
        MatrixFormat::Ppm => return Err(Failure::config("factors cannot be written as PPM")),
    };
    // columns in descending singular value order
    let flip = |m: &DenseMatrix| m.select_cols(&(0..m.cols()).rev().collect::<Vec<_>>());
    save_matrix(&dir.join(format!("u.{ext}")), &flip(&svd.u), format).map_err(Failure::other)?;
    save_matrix(&dir.join(format!("v.{ext}")), &flip(&svd.v), format).map_err(Failure::other)?;
    let sigma: String = svd.sigma_desc().iter().map(|s| format!("{s:?}\n")).collect();
    std::fs::write(dir.join("sigma.txt"), sigma).map_err(|e| Failure::other(format!("{}: {e}", dir.display())))
}

fn factorize(a: FactorizeArgs) -> Result<i32, Failure> {
    let format = resolve_format(&a.input, a.format)?;
    let m = load_matrix(&a.input, format).map_err(Failure::other)?;
    let (rows, cols) = m.shape();
    if a.eps.is_none() && a.rank.is_none() {
        return Err(Failure::config("give --eps (fixed precision) or --rank (fixed rank)"));
    }
    let mut cfg = FarpcaConfig::recommended(rows, cols, a.kind, a.eps.unwrap_or(0.0), a.seed);
    cfg.relative = a.rel;
    cfg.power = a.power;
    if let Some(b) = a.block {
        cfg.block = b;
        cfg.max_iters = FarpcaConfig::default_max_iters(cols, b.max(1));
    }
    if let Some(it) = a.max_iters {
        cfg.max_iters = it;
    }
    if let Some(p) = a.p {
        cfg.sketch = SketchSpec { p, ..cfg.sketch };
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    let norm = m.frob_norm();
    let start = Instant::now();
    let (svd, reached) = match a.rank {
        Some(l) => (run_fixed_rank(&m, l, &cfg).map_err(Failure::other)?, true),
        None => match run_fixed_precision(&m, &cfg) {
            Ok(s) => (s, true),
            Err(FarpcaError::ToleranceNotReached(partial)) => (*partial, false),
            Err(e @ FarpcaError::InvalidConfig(_)) => return Err(Failure::config(e.to_string())),
            Err(e) => return Err(Failure::other(e)),
        },
    };
    let l = svd.rank;
    let svd = match (a.truncate, a.eps) {
        (true, Some(eps)) => truncate_to_tolerance(&svd, if a.rel { eps } else { eps / norm }, norm),
        _ => svd,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let summary = json!({
        "rows": rows,
        "cols": cols,
        "kind": a.kind.label(),
        "p": cfg.sketch.p,
        "power": cfg.power,
        "block": cfg.block,
        "blocks": svd.blocks,
        "l": l,
        "r": svd.rank,
        "relative_error": svd.residual_sq.max(0.0).sqrt() / norm,
        "reached": reached,
        "flagged": svd.flagged.len(),
        "seconds": elapsed,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    if let Some(dir) = &a.out {
        write_factors(dir, &svd, a.out_format)?;
    }
    Ok(if reached { EXIT_OK } else { EXIT_NOT_REACHED })
}

fn bench(a: BenchArgs) -> Result<i32, Failure> {
    let classify = |e: ExperimentError| if e.is_config() { Failure::config(e.to_string()) } else { Failure::other(e) };
    let mut cfg = ExperimentConfig::load(&a.config).map_err(classify)?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    let mut report = run_experiment(&cfg).map_err(classify)?;
    for path in &a.reference {
        let f = std::fs::File::open(path).map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
        report.references.extend(read_reference_csv(f).map_err(Failure::other)?);
    }
    report.write_all(&a.out).map_err(Failure::other)?;
    println!("{:<18} {:<16} {:>6} {:>9} {:>2} {:>4} {:>9} {:>8} {:>8} {:>10} {:>8} {:>6}", "matrix", "algorithm", "n", "p", "P", "b", "eps", "l", "r", "err", "t", "succ");
    for g in report.aggregate() {
        println!(
            "{:<18} {:<16} {:>6} {:>9.2e} {:>2} {:>4} {:>9.2e} {:>8.1} {:>8.1} {:>10.3e} {:>8.3} {:>3}/{:<3}",
            g.matrix, g.algorithm, g.n, g.p, g.power, g.b, g.eps, g.mean_l, g.mean_r, g.mean_err, g.mean_t, g.successes, g.runs
        );
    }
    println!("{} runs written to {}", report.records.len(), a.out.display());
    Ok(EXIT_OK)
}

fn read_spectrum(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
    let mut s = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Failure::config(format!("{}: bad singular value {t:?}", path.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn bounds(a: BoundsArgs) -> Result<i32, Failure> {
    let sigma = match (&a.sigma, &a.kind) {
        (Some(path), _) => read_spectrum(path)?,
        (None, Some(kind)) => {
            let kind = SyntheticKind::from_label(kind).ok_or_else(|| Failure::config(format!("unknown spectrum {kind:?}")))?;
            kind.spectrum(a.n.expect("clap enforces --n"))
        }
        (None, None) => return Err(Failure::config("give --sigma FILE or --kind with --n")),
    };
    let inputs = BoundInputs::from_spectrum(a.k, a.h, a.power, &sigma).with_probability(a.u, a.t);
    let table = bound_table(&inputs).map_err(|e| Failure::config(e.to_string()))?;
    let mut out = json!({
        "k": a.k,
        "h": a.h,
        "power": a.power,
        "u": a.u,
        "t": a.t,
        "columns": ["classical", "asymptotic"],
        "bounds": table,
    });
    if let Some(mn) = &a.pinv {
        let rep = pinv_monte_carlo(mn[0], mn[1], a.draws, a.seed).map_err(|e| Failure::config(e.to_string()))?;
        out["pinv"] = serde_json::to_value(&rep).expect("json");
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(EXIT_OK)
}

fn statcheck(a: StatcheckArgs) -> Result<i32, Failure> {
    let spec = SketchSpec::new(a.kind, a.p, a.seed).map_err(|e| Failure::config(e.to_string()))?;
    let choice = if a.violation { RowChoice::Identity } else { RowChoice::Haar };
    let ladder = ks_ladder(&spec, &a.ladder, a.reps, choice).map_err(|e| Failure::config(e.to_string()))?;
    println!("{:>6} {:>10} {:>12} {:>8} {:>10}", "n", "ks", "sum|u|^3", "ratio", "crit(5%)");
    for pt in &ladder {
        println!("{:>6} {:>10.5} {:>12.5} {:>8.3} {:>10.5}", pt.n, pt.statistic, pt.bound_scale, pt.ratio, pt.critical);
    }
    if let Some(path) = &a.out {
        let body = serde_json::to_string_pretty(&ladder).expect("json");
        std::fs::write(path, body).map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
    }
    Ok(EXIT_OK)
}

fn gen(a: GenArgs) -> Result<i32, Failure> {
    if a.kind == "photo" {
        let (h, w) = (a.height.expect("clap enforces --height"), a.width.expect("clap enforces --width"));
        let img = synthetic_photo(h, w, a.seed).map_err(Failure::other)?;
        std::fs::write(&a.out, encode_ppm(&img)).map_err(|e| Failure::other(format!("{}: {e}", a.out.display())))?;
        return Ok(EXIT_OK);
    }
    let kind = SyntheticKind::from_label(&a.kind).ok_or_else(|| Failure::config(format!("unknown matrix kind {:?}", a.kind)))?;
    let n = a.n.ok_or_else(|| Failure::config("--n is required"))?;
    let spec = SyntheticSpec { kind, n, d: a.d, seed: a.seed };
    let cap = a.mem_cap_mb.map_or(DEFAULT_MEMORY_CAP, |mb| mb << 20);
    let format = resolve_format(&a.out, a.format)?;
    let m = gen_synthetic(&spec, cap).map_err(|e| Failure::config(e.to_string()))?;
    save_matrix(&a.out, &m, format).map_err(Failure::other)?;
    Ok(EXIT_OK)
}
