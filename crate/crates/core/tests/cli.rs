//! Drives the `frontier-lab` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn data(name: &str) -> PathBuf {
    root().join("data").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontier-lab"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn is_empty(dir: &Path) -> bool {
    std::fs::read_dir(dir).unwrap().next().is_none()
}

#[test]
fn ingest_summarises_panel() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["ingest", data("annex1_rd_index.csv").to_str().unwrap(), "--indicator", "rd_index", "--out", "rd.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["series"], 25);
    assert_eq!(v["years"][0]["extrema"]["max"]["code"], "ARM");
    assert!(dir.path().join("rd.json").exists());
}

#[test]
fn ingest_rejects_malformed_csv() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "Country Name,Code,2005\nArgentina,AR,1.0\n").unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let o = run(&out, &["ingest", bad.to_str().unwrap(), "--indicator", "x", "--out", "s.json"]);
    assert_eq!(code(&o), 1);
    assert!(is_empty(&out));
}

#[test]
fn fit_writes_summary() {
    let dir = TempDir::new().unwrap();
    let labour = data("synthetic_labour.csv");
    let o = run(dir.path(), &["fit", "--output", data("synthetic_output.csv").to_str().unwrap(), "--inputs", labour.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(v["converged"], true);
    assert!(v["sigma_v"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_quantile_and_validation() {
    let dir = TempDir::new().unwrap();
    let (out, inp) = (data("synthetic_output.csv"), data("synthetic_labour.csv"));
    let o = run(dir.path(), &["fit", "--output", out.to_str().unwrap(), "--inputs", inp.to_str().unwrap(), "--quantile", "1.5"]);
    assert_eq!(code(&o), 1);
    assert!(is_empty(dir.path()));
    let o = run(dir.path(), &["fit", "--output", out.to_str().unwrap(), "--inputs", inp.to_str().unwrap(), "--quantile", "0.9", "--report", "q.json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("q.json")).unwrap()).unwrap();
    assert_eq!(v["quantile"], 0.9);
}

fn write_curve(path: &Path, f: impl Fn(f64) -> f64) {
    let n = 101;
    let mut text = String::from("theta,value\n");
    for k in 0..n {
        let t = 1.0 + (std::f64::consts::E - 1.0) * k as f64 / (n - 1) as f64;
        text.push_str(&format!("{t},{}\n", f(t)));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn lp_distance_and_bound() {
    let dir = TempDir::new().unwrap();
    let (f, g) = (dir.path().join("f.csv"), dir.path().join("g.csv"));
    write_curve(&f, f64::ln);
    write_curve(&g, |t| 0.5 * t - 0.5);
    let o = run(dir.path(), &["lp", "--f", f.to_str().unwrap(), "--g", g.to_str().unwrap(), "--p", "3", "--degree", "2", "--mobius", "2,0,0,1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["distance"].as_f64().unwrap() > 0.0);
    let b = &v["bound"];
    assert!(b["achieved_error"].as_f64().unwrap() <= b["lambda"].as_f64().unwrap());
}

#[test]
fn lp_rejects_mismatched_grids() {
    let dir = TempDir::new().unwrap();
    let (f, g) = (dir.path().join("f.csv"), dir.path().join("g.csv"));
    write_curve(&f, f64::ln);
    std::fs::write(&g, "theta,value\n1,0\n2,1\n3,2\n").unwrap();
    let o = run(dir.path(), &["lp", "--f", f.to_str().unwrap(), "--g", g.to_str().unwrap(), "--out", "lp.json"]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("lp.json").exists());
}

#[test]
fn simulate_is_seeded() {
    let dir = TempDir::new().unwrap();
    let a = run(dir.path(), &["--seed", "5", "simulate", "--n-partitions", "256", "--out", "a.csv"]);
    let b = run(dir.path(), &["simulate", "--seed", "5", "--n-partitions", "256", "--out", "b.csv", "--horizon", "long"]);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    let (ta, tb) = (std::fs::read(dir.path().join("a.csv")).unwrap(), std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(stdout_json(&b)["basis"].as_array().unwrap().len(), 5);
}

#[test]
fn simulate_validates_before_writing() {
    let dir = TempDir::new().unwrap();
    for args in [vec!["simulate", "--n-partitions", "0"], vec!["simulate", "--horizon", "decade"], vec!["simulate", "--at", "1,2"]] {
        let o = run(dir.path(), &args);
        assert_eq!(code(&o), 1, "{args:?}");
    }
    assert!(is_empty(dir.path()));
}

#[test]
fn certify_reports_verdict() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["certify", "--variant", "geometric", "--h", "0.05"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["kind"], "converged_at");
    let cert: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cert.json")).unwrap()).unwrap();
    assert_eq!(cert["variant"], "geometric_form");
    let o = run(dir.path(), &["certify", "--variant", "geometric", "--h", "10"]);
    assert_eq!(stdout_json(&o)["kind"], "diverged");
}

#[test]
fn certify_validates_before_writing() {
    let dir = TempDir::new().unwrap();
    for args in [vec!["certify", "--h", "-1"], vec!["certify", "--K", "0"], vec!["certify", "--variant", "spline"], vec!["certify", "--tol", "0"]] {
        let o = run(dir.path(), &args);
        assert_eq!(code(&o), 1, "{args:?}");
    }
    assert!(is_empty(dir.path()));
}

#[test]
fn fractal_on_simulated_path() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["--seed", "3", "simulate", "--n-partitions", "8192"])), 0);
    let path = dir.path().join("path.csv");
    let o = run(dir.path(), &["fractal", "--series", path.to_str().unwrap(), "--out", "box.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(dir.path(), &["fractal", "--series", path.to_str().unwrap(), "--method", "rs", "--difference", "--max-window", "2048", "--out", "rs.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["box.json", "rs.json"] {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap();
        let d = v["bound"]["point"].as_f64().unwrap();
        assert!((1.3..1.7).contains(&d), "{name}: {d}");
    }
}

#[test]
fn fractal_validates_before_writing() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("s.csv");
    std::fs::write(&series, "t,value\n0,1\n1,2\n2,0\n3,1\n").unwrap();
    let o = run(dir.path(), &["fractal", "--series", series.to_str().unwrap(), "--scales", "2"]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("bound.json").exists());
}

#[test]
fn report_exit_codes() {
    let dir = TempDir::new().unwrap();
    let synthetic = root().join("configs/synthetic.toml");
    let annex = root().join("configs/annex.toml");
    assert_eq!(code(&run(dir.path(), &["report", "--config", synthetic.to_str().unwrap()])), 0);
    let flagged = run(dir.path(), &["report", "--config", annex.to_str().unwrap()]);
    assert_eq!(code(&flagged), 2);
    assert_eq!(String::from_utf8_lossy(&flagged.stdout).trim(), "\"flagged\"");
    assert!(dir.path().join("report.json").exists());
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&run(dir.path(), &["report", "--config", missing.to_str().unwrap()])), 1);
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["simulate", "--bogus"])), 1);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
}
