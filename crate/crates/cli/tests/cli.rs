use std::fs;
use std::io::Write;
use std::process::{Command, Stdio};

use logon_core::testing::fixtures;

fn logon() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_logon"));
    c.env_remove("LOGON_CACHE");
    c
}

fn project() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("lf.mmt"), fixtures::LF).unwrap();
    fs::write(d.path().join("pl.mmt"), fixtures::PL).unwrap();
    d
}

#[test]
fn check_reports_positions_and_fails() {
    let d = tempfile::tempdir().unwrap();
    let bad = fixtures::PL.replace("andI p p ❙", "andI p q ❙");
    fs::write(d.path().join("pl.mmt"), &bad).unwrap();
    let out = logon().arg("check").arg(d.path().join("pl.mmt")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = bad.lines().position(|l| l.contains("andI p q")).unwrap() + 1;
    assert!(text.contains(&format!("pl.mmt:{line}:")), "{text}");
    assert!(text.ends_with("1 errors\n"), "{text}");

    fs::write(d.path().join("pl.mmt"), fixtures::PL).unwrap();
    let out = logon().arg("check").arg(d.path().join("pl.mmt")).arg("--json").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "[]");
}

#[test]
fn build_then_reuse_the_cache() {
    let d = project();
    let out = logon().arg("build").arg(d.path()).output().unwrap();
    assert!(out.status.success());
    assert!(d.path().join(".cache/html/pl.mmt.html").exists());
    let out = logon().arg("build").arg(d.path()).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("(0 built, 2 cached), 0 errors"), "{text}");
}

#[test]
fn search_lists_hits_and_rejects_bad_queries() {
    let d = project();
    let out = logon().arg("search").arg(d.path()).arg("$x: x∧x").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PL?example^def (inferred) x := A"), "{text}");
    assert!(text.ends_with("2 hits\n"), "{text}");
    let out = logon().arg("search").arg(d.path()).arg("$x: x ∧").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_over_stdio() {
    let d = project();
    let mut child = logon()
        .args(["serve", "--stdio"])
        .arg(d.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"{\"id\":1,\"method\":\"diagnostics\",\"params\":{\"uri\":\"pl.mmt\"}}\n{\"id\":2,\"method\":\"shutdown\"}\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["result"]["version"], 0);
    assert_eq!(lines[0]["result"]["diagnostics"], serde_json::json!([]));
}
