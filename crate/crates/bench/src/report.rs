//! Per-run records, CSV and JSON emission, and plot series.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// CSV header, in the order every report is written and read.
pub const CSV_COLUMNS: [&str; 11] = ["algorithm", "n", "p", "P", "b", "eps", "l", "r", "err", "t", "success"];

/// One factorization run. Only the first eleven fields are written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub n: usize,
    pub p: f64,
    #[serde(rename = "P")]
    pub power: u32,
    pub b: usize,
    pub eps: f64,
    /// Rank returned by the factorization.
    pub l: usize,
    /// Rank after truncation; equals `l` when no truncation was requested.
    pub r: usize,
    /// Relative Frobenius error.
    pub err: f64,
    /// Wall time in seconds, all phases included.
    pub t: f64,
    pub success: bool,
    #[serde(skip)]
    pub extra: RunExtra,
}

/// Fields kept out of the CSV schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunExtra {
    pub matrix: String,
    pub seed: u64,
    pub trial: usize,
    /// Assembly time (eigen/Cholesky whitening and the small SVD).
    pub t_assemble: f64,
    pub t_truncate: f64,
    pub failure: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected CSV header {found:?}")]
    Header { found: Vec<String> },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_csv<W: std::io::Write>(out: W, records: &[RunRecord]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>, ReportError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(ReportError::Header { found: header });
    }
    rd.deserialize().map(|r| r.map_err(ReportError::from)).collect()
}

/// A row of an externally produced results table. Any column other than
/// `algorithm` may be missing or blank.
#[derive(Debug, Deserialize)]
struct ReferenceRow {
    algorithm: String,
    n: Option<usize>,
    p: Option<f64>,
    #[serde(rename = "P")]
    power: Option<u32>,
    b: Option<usize>,
    eps: Option<f64>,
    l: Option<usize>,
    r: Option<usize>,
    err: Option<f64>,
    t: Option<f64>,
    success: Option<bool>,
    matrix: Option<String>,
}

/// Reads reference results (for solvers not implemented here). Missing
/// numeric fields become `NaN` or zero.
pub fn read_reference_csv<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>, ReportError> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for row in rd.deserialize::<ReferenceRow>() {
        let row = row?;
        let l = row.l.unwrap_or(0);
        out.push(RunRecord {
            algorithm: row.algorithm,
            n: row.n.unwrap_or(0),
            p: row.p.unwrap_or(f64::NAN),
            power: row.power.unwrap_or(0),
            b: row.b.unwrap_or(0),
            eps: row.eps.unwrap_or(f64::NAN),
            l,
            r: row.r.unwrap_or(l),
            err: row.err.unwrap_or(f64::NAN),
            t: row.t.unwrap_or(f64::NAN),
            success: row.success.unwrap_or(true),
            extra: RunExtra {
                matrix: row.matrix.unwrap_or_default(),
                ..RunExtra::default()
            },
        });
    }
    Ok(out)
}

/// Means over the runs sharing a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub matrix: String,
    pub algorithm: String,
    pub n: usize,
    pub p: f64,
    #[serde(rename = "P")]
    pub power: u32,
    pub b: usize,
    pub eps: f64,
    /// Requested rank in fixed-rank sweeps.
    pub target: Option<usize>,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_l: f64,
    pub mean_r: f64,
    pub mean_err: f64,
    /// Sample standard deviation of `err`; zero for a single run.
    pub std_err: f64,
    pub mean_t: f64,
    pub median_t: f64,
    pub mean_t_assemble: f64,
    pub mean_t_truncate: f64,
    /// Assembly plus truncation, the post-processing share of `t`.
    pub mean_t_post: f64,
}

/// x–y points for one curve of one figure panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSeries {
    pub panel: String,
    pub algorithm: String,
    pub x: &'static str,
    pub y: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n − 1` denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub records: Vec<RunRecord>,
    /// Rows ingested from external reference tables.
    pub references: Vec<RunRecord>,
    /// Requested rank per record in fixed-rank sweeps, parallel to `records`.
    pub targets: Vec<Option<usize>>,
}

/// Grouping key; floats are keyed by their bit patterns.
type Key = (String, String, usize, u64, u32, usize, u64, Option<usize>);

impl ExperimentReport {
    pub fn push(&mut self, record: RunRecord, target: Option<usize>) {
        self.records.push(record);
        self.targets.push(target);
    }

    pub fn aggregate(&self) -> Vec<Aggregate> {
        let mut groups: BTreeMap<Key, Vec<&RunRecord>> = BTreeMap::new();
        for (r, t) in self.records.iter().zip(self.targets.iter().chain(core::iter::repeat(&None))) {
            let key = (r.extra.matrix.clone(), r.algorithm.clone(), r.n, r.p.to_bits(), r.power, r.b, r.eps.to_bits(), *t);
            groups.entry(key).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|((matrix, algorithm, n, p, power, b, eps, target), rs)| {
                let col = |f: fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
                let errs = col(|r| r.err);
                let ts = col(|r| r.t);
                let successes = rs.iter().filter(|r| r.success).count();
                let assemble = mean(&col(|r| r.extra.t_assemble));
                let truncate = mean(&col(|r| r.extra.t_truncate));
                Aggregate {
                    matrix,
                    algorithm,
                    n,
                    p: f64::from_bits(p),
                    power,
                    b,
                    eps: f64::from_bits(eps),
                    target,
                    runs: rs.len(),
                    successes,
                    success_rate: successes as f64 / rs.len() as f64,
                    mean_l: mean(&col(|r| r.l as f64)),
                    mean_r: mean(&col(|r| r.r as f64)),
                    mean_err: mean(&errs),
                    std_err: std_dev(&errs),
                    mean_t: mean(&ts),
                    median_t: median(&ts),
                    mean_t_assemble: assemble,
                    mean_t_truncate: truncate,
                    mean_t_post: assemble + truncate,
                }
            })
            .collect()
    }

    /// Error and time curves per panel. The x axis is the requested rank
    /// when a panel sweeps ranks, otherwise the sketch density `p`.
    pub fn plot_series(&self) -> Vec<PlotSeries> {
        let aggs = self.aggregate();
        let mut panels: BTreeMap<(String, usize, u32), Vec<&Aggregate>> = BTreeMap::new();
        for a in &aggs {
            panels.entry((a.matrix.clone(), a.n, a.power)).or_default().push(a);
        }
        let mut out = Vec::new();
        for ((matrix, n, power), group) in panels {
            let by_rank = group.iter().any(|a| a.target.is_some());
            let panel = format!("{matrix} n={n} P={power}");
            let mut curves: BTreeMap<&str, Vec<&Aggregate>> = BTreeMap::new();
            for a in &group {
                curves.entry(a.algorithm.as_str()).or_default().push(a);
            }
            for (algorithm, pts) in curves {
                let x = |a: &Aggregate| if by_rank { a.target.unwrap_or(0) as f64 } else { a.p };
                for (y, f) in [("err", (|a: &Aggregate| a.mean_err) as fn(&Aggregate) -> f64), ("t", |a| a.mean_t), ("success_rate", |a| a.success_rate)] {
                    let mut points: Vec<(f64, f64)> = pts.iter().map(|a| (x(a), f(a))).collect();
                    points.sort_by(|p, q| p.0.total_cmp(&q.0));
                    out.push(PlotSeries {
                        panel: panel.clone(),
                        algorithm: algorithm.to_owned(),
                        x: if by_rank { "l" } else { "p" },
                        y,
                        points,
                    });
                }
            }
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "runs": self.records.len(),
            "aggregates": self.aggregate(),
            "references": self.references,
        })
    }

    /// Writes `records.csv`, `summary.json` and `plots.json` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let csv_path = dir.join("records.csv");
        write_csv(fs::File::create(&csv_path).map_err(io_err(&csv_path))?, &self.records)?;
        let json_path = dir.join("summary.json");
        fs::write(&json_path, serde_json::to_string_pretty(&self.summary_json())?).map_err(io_err(&json_path))?;
        let plot_path = dir.join("plots.json");
        fs::write(&plot_path, serde_json::to_string_pretty(&self.plot_series())?).map_err(io_err(&plot_path))?;
        Ok(())
    }
}
