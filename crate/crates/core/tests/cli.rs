use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minmetric"))
}

fn domain_file(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

fn record(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    serde_json::from_str(text.trim()).unwrap()
}

#[test]
fn metric_ball_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ball = domain_file(dir.path(), "ball.json", r#"{"kind":"ball","center":[0,0,0],"radius":1}"#);
    let out = bin().args(["metric", "--domain", &ball, "--point", "0.5,0,0", "--dir", "1,0,0"]).output().unwrap();
    assert!(out.status.success());
    let r = record(&out);
    assert!((r["outputs"]["exact"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn metric_halfspace_sandwich() {
    let dir = tempfile::tempdir().unwrap();
    let hs = domain_file(dir.path(), "hs.json", r#"{"kind":"halfspace","normal":[1,0,0],"offset":0}"#);
    let out = bin().args(["metric", "--domain", &hs, "--point", "1,0,0", "--dir", "1,0,0"]).output().unwrap();
    assert!(out.status.success());
    let r = record(&out);
    let lower = r["outputs"]["lower"]["value"].as_f64().unwrap();
    let upper = r["outputs"]["upper"]["bound"].as_f64().unwrap();
    assert_eq!(lower, 0.5);
    assert!(upper <= 0.55 && lower <= upper);
}

#[test]
fn input_errors_and_infeasible_points() {
    let dir = tempfile::tempdir().unwrap();
    let bad = domain_file(dir.path(), "bad.json", r#"{"kind":"ball","center":[0,0"#);
    let out = bin().args(["metric", "--domain", &bad, "--point", "0,0,0", "--dir", "1,0,0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain JSON"));
    let ball = domain_file(dir.path(), "ball.json", r#"{"kind":"ball","center":[0,0,0],"radius":1}"#);
    let out = bin().args(["metric", "--domain", &ball, "--point", "2,0,0", "--dir", "1,0,0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["metric", "--domain", &ball, "--point", "0,0", "--dir", "1,0,0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["metric", "--domain", &ball, "--point", "0,0,0", "--dir", "0,0,0"]).output().unwrap();
    assert_eq!(record(&out)["outputs"]["exact"], 0.0);
    let hs = domain_file(dir.path(), "hs.json", r#"{"kind":"halfspace","normal":[1,0,0],"offset":0}"#);
    let out = bin().args(["metric", "--domain", &hs, "--point", "1,0,0", "--dir", "0,0,0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["verify", "--suite", "missing"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn distance_on_ball() {
    let dir = tempfile::tempdir().unwrap();
    let ball = domain_file(dir.path(), "ball.json", r#"{"kind":"ball","center":[0,0,0],"radius":1}"#);
    let out = bin().args(["distance", "--domain", &ball, "--from", "0,0,0", "--to", "0.5,0,0"]).output().unwrap();
    assert!(out.status.success());
    let r = record(&out);
    let truth = 0.5 * 3f64.ln();
    let upper = r["outputs"]["chain_upper"].as_f64().unwrap();
    let lower = r["outputs"]["lower"]["value"].as_f64().unwrap();
    assert!((upper - truth).abs() <= 0.02 * truth && lower >= 0.538 && lower <= upper);
    assert!(!r["outputs"]["chain"]["links"].as_array().unwrap().is_empty());
}

#[test]
fn classify_slab_and_sublevel() {
    let dir = tempfile::tempdir().unwrap();
    let slab = domain_file(
        dir.path(),
        "slab.json",
        r#"{"kind":"polyhedral","halfspaces":[{"normal":[1,0,0],"offset":0},{"normal":[-1,0,0],"offset":-1}]}"#,
    );
    let r = record(&bin().args(["classify", "--domain", &slab]).output().unwrap());
    assert_eq!(r["outputs"]["status"], "NonHyperbolic");
    assert_eq!(r["outputs"]["certificate"]["kind"], "witness_plane");
    let ell = domain_file(
        dir.path(),
        "ell.json",
        r#"{"kind":"sublevel","expr":"x1^2+x2^2+2*x3^2-1","box":[[-1.5,1.5],[-1.5,1.5],[-1.5,1.5]],"convex_hint":true}"#,
    );
    let r = record(&bin().args(["classify", "--domain", &ell, "--collar", "0.2"]).output().unwrap());
    assert_eq!(r["outputs"]["status"], "CompleteHyperbolic");
}

#[test]
fn verify_ball_suite() {
    let out = bin().args(["verify", "--suite", "ball"]).output().unwrap();
    assert!(out.status.success());
    let r = record(&out);
    assert_eq!(r["outputs"]["pass"], true);
    assert_eq!(r["outputs"]["criteria"].as_array().unwrap().len(), 4);
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cyl = domain_file(
        dir.path(),
        "cyl.json",
        r#"{"kind":"sublevel","expr":"x1^2+x2^2-1","box":[[-2,2],[-2,2],[-10,10]],"convex_hint":true}"#,
    );
    let run = || {
        bin()
            .args([
                "metric",
                "--domain",
                &cyl,
                "--point",
                "0,0,0",
                "--plane",
                "1,0,0;0,1,0",
                "--seed",
                "7",
                "--multistarts",
                "6",
            ])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r = record(&a);
    let upper = r["outputs"]["upper"]["bound"].as_f64().unwrap();
    assert!((1.0..=1.05).contains(&upper), "{upper}");
}

#[test]
fn records_append_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let ball = domain_file(dir.path(), "ball.json", r#"{"kind":"ball","center":[0,0,0],"radius":2}"#);
    let log = dir.path().join("out.jsonl");
    for p in ["0,0,0", "1,0,0"] {
        let st = bin()
            .args([
                "metric",
                "--domain",
                &ball,
                "--point",
                p,
                "--dir",
                "0,1,0",
                "--timing",
                "--out",
                log.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(st.success());
    }
    let text = std::fs::read_to_string(&log).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["wall_time_ms"].is_number()));
}
