use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hessian-lab"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("--config").arg(config).arg("--out-dir").arg(out).args(extra).output().unwrap()
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"));
    v["error"].clone()
}

const SOLVE: &str = r#"{"subcommand":"solve","n":1,"m":1,"h":"1/8","omega":"zero","mu":"1","F":"1","G":"1","phi":"0"}"#;

#[test]
fn solve_writes_manifest_and_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SOLVE);
    let out = tmp.path().join("run");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "solve");
    assert_eq!(manifest["success"], true);
    for name in manifest["artifacts"].as_array().unwrap() {
        assert!(out.join(name.as_str().unwrap()).exists(), "{name}");
    }
    let csv = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(csv.starts_with("index,x1,y1,value\n"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solve"]["converged"], true);
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SOLVE);
    let out = tmp.path().join("run");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(0));
    fs::write(out.join("notes.txt"), "keep me").unwrap();
    let second = run(&cfg, &out, &[]);
    assert_eq!(second.status.code(), Some(2));
    assert_eq!(stderr_error(&second)["kind"], "output");
    assert_eq!(run(&cfg, &out, &["--force"]).status.code(), Some(0));
    // Files the tool did not write survive --force.
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "keep me");
}

#[test]
fn config_errors_exit_2_with_a_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cases = [
        ("{not json", "parse"),
        (r#"{"subcommand":"solve","n":1,"m":"one","h":"1/8"}"#, "schema"),
        (r#"{"subcommand":"solve","n":1,"m":1,"h":"1/8","bogus":3}"#, "schema"),
        (r#"{"subcommand":"solve","n":1,"m":2,"h":"1/8","F":"1","G":"1"}"#, "domain"),
        (r#"{"subcommand":"solve","n":1,"m":1,"h":"1/8","F":"1 +","G":"1"}"#, "domain"),
    ];
    for (body, kind) in cases {
        let cfg = write_config(tmp.path(), body);
        let o = run(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        let err = stderr_error(&o);
        assert_eq!(err["kind"], kind, "{body}: {err}");
        assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn subcommand_mismatch_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SOLVE);
    let o = bin().arg("picard").arg("--config").arg(&cfg).arg("--out-dir").arg(tmp.path().join("r")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_error(&o)["kind"], "usage");
}

#[test]
fn failed_property_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"{"subcommand":"properties","n":1,"m":1,"h":"1/16",
        "properties":{"checks":[{"kind":"comparison","u":"2*(r2 - 1)","v":"r2 - 1"}]}}"#;
    let cfg = write_config(tmp.path(), body);
    let o = run(&cfg, &tmp.path().join("r"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn grid_and_tolerance_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SOLVE);
    let out = tmp.path().join("r");
    let o = run(&cfg, &out, &["--grid", "1/4", "--tol", "1e-9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solve"]["grid_h"], 0.25);
}
