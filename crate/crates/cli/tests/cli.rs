use std::path::Path;
use std::process::Command;

fn darkdoc(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_darkdoc"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn generate_analyze_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = darkdoc(dir.path(), &["fixture", "generate", "chain4", "--out", "fx"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(dir.path().join("c.json"), r#"{"snapshot": "fx/chain4/manifest.json"}"#).unwrap();

    let out = darkdoc(dir.path(), &["analyze", "--config", "c.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("runs/run-1/outputs/md/schema.md").exists());

    let out = darkdoc(
        dir.path(),
        &["compare", "--state", "runs/run-1/state.json", "--truth", "fx/chain4/truth.json", "--json"],
    );
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pk"]["recall"], 1.0);
}

#[test]
fn dry_run_and_guardrail_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    darkdoc(dir.path(), &["fixture", "generate", "lousy8", "--out", "fx"]);
    std::fs::write(dir.path().join("c.json"), r#"{"snapshot": "fx/lousy8/manifest.json"}"#).unwrap();
    let out = darkdoc(dir.path(), &["analyze", "--config", "c.json", "--dry-run"]);
    assert!(out.status.success());
    let state = std::fs::read_to_string(dir.path().join("runs/run-1/state.json")).unwrap();
    assert!(state.contains("\"refinement\": null"));

    std::fs::write(
        dir.path().join("tight.json"),
        r#"{"snapshot": "fx/lousy8/manifest.json", "guardrails": {"maxTokensPerRun": 300}}"#,
    )
    .unwrap();
    let out = darkdoc(dir.path(), &["analyze", "--config", "tight.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = darkdoc(dir.path(), &["analyze", "--resume", "runs/run-2/state.json", "--config", "c.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn rejects_unknown_fixture_and_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = darkdoc(dir.path(), &["fixture", "generate", "nope"]);
    assert!(!out.status.success());
    std::fs::write(dir.path().join("c.json"), r#"{"sampelSize": 5}"#).unwrap();
    let out = darkdoc(dir.path(), &["analyze", "--config", "c.json"]);
    assert_eq!(out.status.code(), Some(1));
}
