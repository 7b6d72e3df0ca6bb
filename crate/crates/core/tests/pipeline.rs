//! Report pipeline: schema conformance, status, determinism.

use std::path::{Path, PathBuf};

use frontier_lab::report::{self, Config, HeadlineStatus, RunStatus, SCHEMA_VERSION};
use serde_json::Value;
use tempfile::TempDir;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn schema() -> Value {
    serde_json::from_str(&std::fs::read_to_string(root().join("schema/report.schema.json")).unwrap()).unwrap()
}

fn assert_valid(report: &Value) {
    let validator = jsonschema::validator_for(&schema()).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn run(config: &Path) -> (TempDir, Value, report::RunReport) {
    let dir = TempDir::new().unwrap();
    let r = report::run_pipeline(config, dir.path(), None).unwrap();
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    (dir, json, r)
}

#[test]
fn schema_version_matches_library() {
    let s = schema();
    assert_eq!(s["properties"]["schema_version"]["const"], SCHEMA_VERSION);
    assert!(s["$id"].as_str().unwrap().ends_with(SCHEMA_VERSION));
}

#[test]
fn synthetic_run_is_clean() {
    let (dir, json, r) = run(&root().join("configs/synthetic.toml"));
    assert_valid(&json);
    assert_eq!(r.status, RunStatus::Ok);
    assert_eq!(r.exit_code(), 0);
    assert_eq!(r.flags, 0);
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    for name in ["plot_efficiency.csv", "plot_simulation.csv", "plot_fractal.csv", "plot_certificates.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("series,x,y\n") && text.lines().count() > 1, "{name}");
    }
}

#[test]
fn annex_run_flags_discrepancies() {
    let (_dir, json, r) = run(&root().join("configs/annex.toml"));
    assert_valid(&json);
    assert_eq!(r.status, RunStatus::Flagged);
    assert_eq!(r.exit_code(), 2);
    assert!(r.flags >= 1);
    for h in r.headline.iter().filter(|h| h.status == HeadlineStatus::Fail) {
        // claimed and computed travel together
        assert!(h.computed.is_some());
        assert!(h.reason.contains(&format!("{}", h.claim.claimed)));
    }
    assert!(r.notes.iter().any(|n| n.contains("bootstrap")));
}

#[test]
fn reports_are_deterministic() {
    let config = root().join("configs/annex.toml");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    report::run_pipeline(&config, a.path(), Some(99)).unwrap();
    report::run_pipeline(&config, b.path(), Some(99)).unwrap();
    for name in ["report.json", "plot_simulation.csv", "plot_fractal.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = TempDir::new().unwrap();
    report::run_pipeline(&config, c.path(), Some(100)).unwrap();
    assert_ne!(std::fs::read(a.path().join("report.json")).unwrap(), std::fs::read(c.path().join("report.json")).unwrap());
}

#[test]
fn failed_fit_still_reports() {
    // the regressor panel shares no country with the output panel
    let text = r#"
        seed = 4
        [data]
        panels = [{ name = "out", path = "out.csv" }, { name = "inp", path = "inp.csv" }]
        output = "out"
        inputs = ["inp"]
    "#;
    let cfg = Config::parse(text, Path::new("inline.toml")).unwrap();
    let out = b"Country Name,Code,2005,2006\nA,AAA,1.0,2.0\nB,BBB,1.5,2.5\n".to_vec();
    let inp = b"Country Name,Code,2005,2006\nC,CCC,1.0,2.0\n".to_vec();
    let files = [(&cfg.data.panels[0], out), (&cfg.data.panels[1], inp)];
    let output = report::execute(&cfg, &files, 4).unwrap();
    let r = &output.report;
    assert_eq!(r.status, RunStatus::Error);
    assert_eq!(r.exit_code(), 1);
    assert!(r.fit.is_none());
    assert!(r.errors.iter().any(|e| e.contains("fit")));
    assert!(r.simulation.is_some());
    assert_valid(&serde_json::from_str(&r.to_json()).unwrap());
}

#[test]
fn unreadable_inputs_write_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[data]\npanels = [{ name = \"o\", path = \"missing.csv\" }]\noutput = \"o\"\ninputs = [\"o\"]\n").unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    assert!(report::run_pipeline(&cfg, &out, None).is_err());
    assert!(std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn schema_rejects_drift() {
    let (_dir, json, _) = run(&root().join("configs/synthetic.toml"));
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let mut extra = json.clone();
    extra["surprise"] = Value::Bool(true);
    assert!(!validator.is_valid(&extra));
    let mut old = json.clone();
    old["schema_version"] = Value::String("0.9.0".into());
    assert!(!validator.is_valid(&old));
    let mut broken = json;
    broken["bounds"][0]["bound"]["point"] = Value::String("1.5".into());
    assert!(!validator.is_valid(&broken));
}
