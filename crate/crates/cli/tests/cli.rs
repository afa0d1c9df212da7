use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn homerule(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homerule"))
        .args(args)
        .env_remove("AUTOIOT_BACKEND")
        .output()
        .expect("binary runs")
}

fn system_args(name: &str) -> Vec<String> {
    let d = fixture(name);
    let mut v = Vec::new();
    for (flag, file) in [("--devices", "devices"), ("--rules", "rules"), ("--conflict-spec", "spec"), ("--overrides", "overrides")] {
        v.push(flag.to_string());
        v.push(d.join(format!("{file}.json")).display().to_string());
    }
    v
}

fn run_with(sub: &str, mut args: Vec<String>, extra: &[&str]) -> Output {
    args.insert(0, sub.to_string());
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    homerule(&refs)
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    assert_eq!(run_with("verify", system_args("heater_ac"), &[]).status.code(), Some(1));
    assert_eq!(run_with("verify", system_args("light"), &[]).status.code(), Some(1));
    assert_eq!(run_with("verify", system_args("case_study"), &[]).status.code(), Some(0));
}

#[test]
fn verify_prints_a_json_report() {
    let out = run_with("verify", system_args("heater_ac"), &[]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let kinds: Vec<&str> = doc["conflicts"].as_array().unwrap().iter().map(|c| c["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds.len(), 2, "{doc}");
}

#[test]
fn case_study_verifies_quickly() {
    let start = Instant::now();
    let out = run_with("verify", system_args("case_study"), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(start.elapsed() < Duration::from_secs(1), "{:?}", start.elapsed());
}

#[test]
fn malformed_input_is_a_usage_error_with_a_position() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("rules.json");
    fs::write(&bad, "{\n  \"r1\": {\"trigger\": \"x\",\n}").unwrap();
    let mut args = system_args("light");
    args[3] = bad.display().to_string();
    let out = run_with("verify", args, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rules.json") && err.contains("line"), "{err}");
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    assert_eq!(homerule(&["verify"]).status.code(), Some(2));
    assert_eq!(homerule(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn emit_maude_is_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.maude");
    let b = tmp.path().join("b.maude");
    for p in [&a, &b] {
        let out = run_with("emit-maude", system_args("case_study"), &["--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let text = fs::read(&a).unwrap();
    assert!(!text.is_empty());
    assert_eq!(text, fs::read(&b).unwrap());
}

#[test]
fn extract_without_a_manuals_directory_fails_as_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let devices = tmp.path().join("devices.json");
    fs::write(&devices, r#"{"light1": {"type": "light"}}"#).unwrap();
    let out = homerule(&[
        "extract",
        "--devices",
        devices.to_str().unwrap(),
        "--manuals",
        tmp.path().join("nope").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn http_backend_without_a_token_fails_before_sending() {
    let tmp = tempfile::tempdir().unwrap();
    let devices = tmp.path().join("devices.json");
    fs::write(&devices, fs::read(fixture("light").join("devices.json")).unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_homerule"))
        .args(["generate", "--devices", devices.to_str().unwrap()])
        .args(["--backend", "http", "--base-url", "http://127.0.0.1:9", "--model", "m"])
        .args(["--api-key-env", "HOMERULE_TEST_UNSET_TOKEN"])
        .env_remove("HOMERULE_TEST_UNSET_TOKEN")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("HOMERULE_TEST_UNSET_TOKEN"));
}

#[test]
fn mock_pipeline_then_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let d = fixture("heater_ac");
    let out = homerule(&[
        "pipeline",
        "--devices",
        d.join("devices.json").to_str().unwrap(),
        "--conflict-spec",
        d.join("spec.json").to_str().unwrap(),
        "--overrides",
        d.join("overrides.json").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["status"], "conflict_free");
    assert!(summary["iterations"].as_u64().unwrap() <= 3);
    let run = tmp.path().join(summary["run_id"].as_str().unwrap());
    assert_eq!(homerule(&["replay", run.to_str().unwrap()]).status.code(), Some(0));

    fs::write(run.join("final/rules.txt"), "edited").unwrap();
    let tampered = homerule(&["replay", run.to_str().unwrap()]);
    assert_eq!(tampered.status.code(), Some(1));
}
