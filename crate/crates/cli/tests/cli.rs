use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use favsites::report::AuditReport;
use favsites_cli::RunManifest;

fn favsites(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_favsites"))
        .args(args)
        .env_remove("FAVSITES_OUT_DIR")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn reports(dir: &Path) -> Vec<AuditReport> {
    serde_json::from_str(&fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap()
}

const SMOKE: &str = r#"{
  "experiment": "smoke",
  "audits": [{"audit": "identity-suite", "paths": 100, "steps": 500}]
}"#;

#[test]
fn smoke_config_exits_zero_with_one_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "smoke.json", SMOKE);
    let out = favsites(&["--config", &cfg, "--out", "o", "all"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir.path().join("o"));
    assert_eq!(m.audits.len(), 1);
    assert_eq!(m.exit_code, 0);
    assert_eq!(m.config_hash.len(), 64);
}

#[test]
fn worker_count_gives_identical_count_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "det.json",
        r#"{"experiment": "det", "audits": [
            {"audit": "identity-suite", "paths": 64, "steps": 300},
            {"audit": "martingale", "kind": "y-quadratic", "params": {"samples": 3000}},
            {"audit": "kernels", "exact_rows": 4, "samples": 20000}
        ]}"#,
    );
    let counts = |workers: &str, sub: &str| {
        let out = favsites(&["--config", &cfg, "--workers", workers, "--seed", "7", "--out", sub, "all"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        reports(&dir.path().join(sub))
            .iter()
            .map(|r| serde_json::to_string(&r.counts).unwrap())
            .collect::<Vec<_>>()
    };
    let one = counts("1", "w1");
    let eight = counts("8", "w8");
    assert!(!one.iter().all(|c| c == "{}"));
    assert_eq!(one, eight);
    // the hash covers the worker count
    assert_ne!(manifest(&dir.path().join("w1")).config_hash, manifest(&dir.path().join("w8")).config_hash);
}

#[test]
fn negative_budget_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        "{\"experiment\": \"bad\",\n \"audits\": [{\"audit\": \"identity-suite\",\n \"paths\": -100}]}",
    );
    let out = favsites(&["--config", &cfg, "all"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("paths"), "{err}");
    assert!(!dir.path().join("favsites-out").join("manifest.json").exists());
}

#[test]
fn unknown_field_and_usage_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "u.json", r#"{"experiment": "u", "audits": [], "seeds": 3}"#);
    assert_eq!(favsites(&["--config", &cfg, "all"], dir.path()).status.code(), Some(3));
    assert_eq!(favsites(&["audit", "--lemma", "lemma-99"], dir.path()).status.code(), Some(3));
    assert_eq!(favsites(&["no-such-command"], dir.path()).status.code(), Some(3));
    assert_eq!(favsites(&["--workers", "0", "enumerate"], dir.path()).status.code(), Some(3));
}

#[test]
fn failing_hard_audit_exits_one() {
    // a short enumeration leaves far too much censored mass at the origin
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rk.json",
        r#"{"experiment": "rk", "audits": [{"audit": "ray-knight", "pairs": [[1, 0]], "samples": 2000, "t_cap": 6}]}"#,
    );
    let out = favsites(&["--config", &cfg, "--out", "o", "all"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir.path().join("o"));
    let ids: Vec<_> = m.audits.iter().map(|a| a.id.as_str()).collect();
    assert_eq!(ids, ["ray-knight-law/x=1/k=0", "ray-knight-origin"]);
}

#[test]
fn diagnostic_failures_do_not_change_the_exit_code() {
    // two windows only; whatever the trend, f4 is a diagnostic
    let dir = tempfile::tempdir().unwrap();
    let out = favsites(
        &["--out", "o", "--format", "csv", "f4-report", "--replicas", "4", "--steps", "5000", "--j-min", "9"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("o");
    assert!(o.join("reports.csv").exists());
    let table = fs::read_to_string(o.join("f4_windows.csv")).unwrap();
    assert!(table.starts_with("j,start,end,complete"));
    assert_eq!(table.lines().count(), 1 + 13);
}

#[test]
fn json_reports_round_trip_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let out = favsites(
        &["--out", "o", "audit", "--lemma", "side-lemma-6", "--lemma", "corollary", "--lemma", "first-passage"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("o/reports.json")).unwrap();
    let parsed: Vec<AuditReport> = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.len(), 3);
    let again = serde_json::to_string_pretty(&parsed).unwrap() + "\n";
    assert_eq!(again, text);
}

#[test]
fn environment_variable_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_favsites"))
        .args(["enumerate", "--t-max", "4"])
        .env("FAVSITES_OUT_DIR", "from-env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("from-env/catalog.json").exists());
}

#[test]
fn enumerate_reports_exact_laws() {
    let dir = tempfile::tempdir().unwrap();
    let out = favsites(&["--out", "o", "--format", "csv", "enumerate", "--t-max", "3", "--r-max", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(dir.path().join("o/catalog.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    // two sites tied at t = 2 on every path, the walker on one of them
    let row = rows.iter().find(|r| &r[0] == "2" && &r[1] == "2").unwrap();
    assert_eq!(&row[4], "1");
    assert_eq!(&row[5], "1");
}

#[test]
fn simulations_write_one_row_per_sample_and_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, workers: &str| {
        let out = favsites(
            &["--out", sub, "--seed", "5", "--workers", workers, "simulate-walk", "--paths", "6", "--steps", "2000"],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        fs::read_to_string(dir.path().join(sub).join("walks.json")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "3"));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&a).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(r["stop_time"], 2000);
        let f: Vec<u64> = serde_json::from_value(r["f"].clone()).unwrap();
        assert!(f.windows(2).all(|w| w[1] <= w[0]));
    }

    let out = favsites(
        &["--out", "c", "--format", "csv", "simulate-chain", "--chain", "y", "--start", "1", "--level", "2", "--samples", "5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("c/chains.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);

    let out = favsites(&["--out", "s", "simulate-walk", "--paths", "3", "--stop-up", "2:1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/walks.json")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r["position"] == 1));
}

#[test]
fn audit_list_prints_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = favsites(&["audit", "--lemma", "list"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l == "lemma-1"));
    assert!(text.lines().any(|l| l == "martingale-z-super"));
}

#[test]
fn readme_config_example_is_valid() {
    let readme = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let start = readme.find("```json\n").expect("json block") + "```json\n".len();
    let end = start + readme[start..].find("```").unwrap();
    let cfg = favsites_cli::ExperimentConfig::parse(&readme[start..end], "README.md").unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.audits.len(), 10);
}
