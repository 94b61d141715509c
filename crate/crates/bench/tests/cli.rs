use std::path::Path;
use std::process::{Command, Output};

use lowrank_bench::io::{load_matrix, MatrixFormat};

fn lowrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_then_factorize_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.bin");
    let out = lowrank(&["gen", "--kind", "slow-decay", "--n", "120", "--seed", "2", "--out", s(&input)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = load_matrix(&input, MatrixFormat::RawF64).unwrap();
    assert_eq!(a.shape(), (120, 120));

    let fac = dir.path().join("factors");
    let out = lowrank(&[
        "factorize", s(&input), "--kind", "sparse-sign", "--eps", "1e-3", "--rel", "--block", "10", "--max-iters", "12", "--truncate", "--out", s(&fac), "--deterministic",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["reached"], true);
    let r = summary["r"].as_u64().unwrap() as usize;
    assert!(r <= summary["l"].as_u64().unwrap() as usize);
    assert!(summary["relative_error"].as_f64().unwrap() <= 1e-3);

    let u = load_matrix(&fac.join("u.bin"), MatrixFormat::RawF64).unwrap();
    let v = load_matrix(&fac.join("v.bin"), MatrixFormat::RawF64).unwrap();
    assert_eq!(u.shape(), (120, r));
    assert_eq!(v.shape(), (120, r));
    let sigma: Vec<f64> = std::fs::read_to_string(fac.join("sigma.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(sigma.len(), r);
    assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn unreached_tolerance_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.mtx");
    assert_eq!(lowrank(&["gen", "--kind", "slow-decay", "--n", "40", "--out", s(&input)]).status.code(), Some(0));
    let out = lowrank(&["factorize", s(&input), "--eps", "1e-12", "--rel", "--block", "2", "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let summary = stdout_json(&out);
    assert_eq!(summary["reached"], false);
    assert_eq!(summary["l"], 2);
}

#[test]
fn fixed_rank_factorization() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.bin");
    assert_eq!(lowrank(&["gen", "--kind", "fast-decay", "--n", "50", "--out", s(&input)]).status.code(), Some(0));
    let out = lowrank(&["factorize", s(&input), "--rank", "7", "--kind", "gaussian"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["r"], 7);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.bin");
    assert_eq!(lowrank(&["gen", "--kind", "fast-decay", "--n", "10", "--out", s(&input)]).status.code(), Some(0));
    assert_eq!(lowrank(&["factorize", s(&input)]).status.code(), Some(2));
    assert_eq!(lowrank(&["factorize", s(&input), "--eps", "0.1", "--kind", "dct"]).status.code(), Some(2));
    assert_eq!(lowrank(&["factorize", s(&input), "--eps", "0.1", "--p", "1.5", "--kind", "sparse-sign"]).status.code(), Some(2));
    assert_eq!(lowrank(&["gen", "--kind", "spiral", "--n", "10", "--out", s(&input)]).status.code(), Some(2));
    assert_eq!(lowrank(&["frobnicate"]).status.code(), Some(2));
    // unreadable input is an I/O failure, not a usage error
    assert_eq!(lowrank(&["factorize", "/nonexistent/a.bin", "--eps", "0.1"]).status.code(), Some(1));
}

#[test]
fn bench_config_errors_and_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\nalgorithms = [\"gaussian\"]\n").unwrap();
    assert_eq!(lowrank(&["bench", s(&bad), "--out", s(&dir.path().join("r0"))]).status.code(), Some(2));

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "[[matrices]]\nkind = \"fast-decay\"\nn = 10\n[grid]\nalgorithms = []\n").unwrap();
    let report = dir.path().join("r1");
    assert_eq!(lowrank(&["bench", s(&empty), "--out", s(&report)]).status.code(), Some(0));
    let csv = std::fs::read_to_string(report.join("records.csv")).unwrap();
    assert_eq!(csv.trim(), "algorithm,n,p,P,b,eps,l,r,err,t,success");
}

#[test]
fn bench_grid_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    std::fs::write(
        &cfg,
        r#"
        trials = 2
        [[matrices]]
        kind = "slow-decay"
        n = 60
        [grid]
        algorithms = ["gaussian", "sparse-gaussian"]
        p = [0.3]
        block = [6]
        eps = [1e-2]
        max_iters = 10
        "#,
    )
    .unwrap();
    let report = dir.path().join("report");
    let out = lowrank(&["bench", s(&cfg), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let records = lowrank_bench::report::read_csv(std::fs::File::open(report.join("records.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.success));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    assert!(summary.to_string().contains("sparse-gaussian"));
    assert!(report.join("plots.json").exists());
}

#[test]
fn bounds_and_pinv_report() {
    let out = lowrank(&["bounds", "--k", "10", "--h", "6", "--u", "2", "--t", "2", "--kind", "slow-decay", "--n", "200", "--pinv", "20", "40", "--draws", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let fp = &v["bounds"]["frob_prob"];
    assert!(fp[1].as_f64().unwrap() < fp[0].as_f64().unwrap());
    assert_eq!(v["pinv"]["spectral"].as_array().unwrap().len(), 4);
    // E‖G†‖²_F = m / (n − m − 1) for a Gaussian m x n
    let limit = v["pinv"]["frob_limit"].as_f64().unwrap();
    assert!((limit * limit - 1.0).abs() < 0.1);
}

#[test]
fn bounds_from_spectrum_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sigma.txt");
    let sigma: String = (1..=40).rev().map(|j| format!("{}\n", 1.0 / j as f64)).collect();
    std::fs::write(&path, sigma).unwrap();
    let out = lowrank(&["bounds", "--k", "5", "--h", "5", "--sigma", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let tail: f64 = (6..=40).map(|j| 1.0 / (j * j) as f64).sum::<f64>().sqrt();
    let want = (1.0f64 + 5.0 / 5.0).sqrt() * tail;
    assert!((v["bounds"]["frob_expected"][1].as_f64().unwrap() - want).abs() < 1e-12);
}

#[test]
fn statcheck_ladder_output() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("ks.json");
    let out = lowrank(&["statcheck", "--kind", "sparse-gaussian", "--ladder", "64,256", "--reps", "3000", "--out", s(&json)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["n"], 256);

    let out = lowrank(&["statcheck", "--kind", "sparse-sign", "--p", "0.01", "--ladder", "64", "--reps", "5000", "--violation"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let ks: f64 = text.lines().nth(1).unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(ks > 0.4, "{text}");
}

#[test]
fn photo_fixture_factorizes_as_stacked_channels() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("photo.ppm");
    assert_eq!(lowrank(&["gen", "--kind", "photo", "--height", "60", "--width", "40", "--out", s(&img)]).status.code(), Some(0));
    let out = lowrank(&["factorize", s(&img), "--eps", "0.1", "--rel", "--block", "4", "--truncate"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!((v["rows"].as_u64(), v["cols"].as_u64()), (Some(180), Some(40)));
    assert!(v["relative_error"].as_f64().unwrap() <= 0.1);
}

#[test]
fn shipped_configs_parse_and_expand() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = lowrank_bench::experiment::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!cfg.matrices.is_empty() && !cfg.grid.algorithms.is_empty(), "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 3);
}
