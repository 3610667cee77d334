use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn weakns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakns"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_manifest(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(experiment: &str, n: usize, data: &str, out: &Path) -> String {
    format!(
        r#"{{"schema_version":1,"experiment":"{experiment}","grid":{{"n":{n},"L":4.0}},"timegrid":{{"T":0.25,"samples":8}},"initial_data":{data},"output_dir":"{}"}}"#,
        out.display()
    )
}

const ZERO: &str = r#"{"kind":"zero"}"#;
const BUMP: &str = r#"{"kind":"curl_bump","amplitude":5.0,"radius":1.4,"seed":7}"#;

#[test]
fn zero_data_kato_run_passes_with_trivial_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let m = write_manifest(dir.path(), "m.json", &manifest("kato", 16, ZERO, &out));
    let res = weakns(&["run", &m]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "pass");
    let flags = summary["flags"].as_array().unwrap();
    assert!(flags.iter().any(|f| f == "trivial: zero data"));
    assert!(out.join("reports/kato.csv").exists());
    assert!(out.join("timing.json").exists());
}

#[test]
fn odd_grid_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", &manifest("kato", 15, ZERO, &dir.path().join("out")));
    let res = weakns(&["run", &m]);
    assert_eq!(res.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["invariant"], "grid.n");
}

#[test]
fn malformed_manifest_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", "{\"schema_version\":1,");
    let res = weakns(&["run", &m]);
    assert_eq!(res.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["invariant"], "manifest_syntax");
}

#[test]
fn dry_run_validates_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let m = write_manifest(dir.path(), "m.json", &manifest("split", 16, BUMP, &out));
    let res = weakns(&["run", &m, "--dry-run"]);
    assert_eq!(res.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["valid"], true);
    assert_eq!(v["manifest_sha256"].as_str().unwrap().len(), 64);
    assert!(!out.exists());
}

#[test]
fn output_dir_flag_overrides_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let elsewhere = dir.path().join("elsewhere");
    let m = write_manifest(dir.path(), "m.json", &manifest("split", 16, BUMP, &dir.path().join("out")));
    let res = weakns(&["run", &m, "--output-dir", elsewhere.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(elsewhere.join("summary.json").exists());
    assert!(elsewhere.join("reports/split.csv").exists());
    assert!(elsewhere.join("plots/tail_profile.csv").exists());
}

#[test]
fn repeated_runs_compare_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let m = write_manifest(dir.path(), "m.json", &manifest("kato", 16, BUMP, &a));
    assert_eq!(weakns(&["run", &m]).status.code(), Some(0));
    assert_eq!(weakns(&["run", &m, "--output-dir", b.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());

    let table = dir.path().join("table.csv");
    let res = weakns(&[
        "compare",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--output",
        table.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("run,experiment,manifest_sha256,status"));
    assert!(rows[0].contains("kato.heat_norm"));
    let tail = |r: &str| r.split_once(',').unwrap().1.to_string();
    assert_eq!(tail(rows[1]), tail(rows[2]));
}

#[test]
fn compare_rejects_mixed_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ma = write_manifest(dir.path(), "a.json", &manifest("kato", 16, ZERO, &a));
    let mb = write_manifest(dir.path(), "b.json", &manifest("split", 16, BUMP, &b));
    assert_eq!(weakns(&["run", &ma]).status.code(), Some(0));
    assert_eq!(weakns(&["run", &mb]).status.code(), Some(0));
    let res = weakns(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["invariant"], "experiment");
}

#[test]
fn failed_contraction_is_a_run_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let big = r#"{"kind":"curl_bump","amplitude":400.0,"radius":1.4,"seed":7}"#;
    let m = write_manifest(dir.path(), "m.json", &manifest("kato", 16, big, &out));
    let res = weakns(&["run", &m]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "run_failure");
}
