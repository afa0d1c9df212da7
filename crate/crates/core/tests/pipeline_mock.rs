use std::fs;
use std::path::{Path, PathBuf};

use homerule::llm::{BackendError, MockBackend, ScriptedBackend};
use homerule::pipeline::{replay_ledger, run_pipeline, LedgerReader, PipelineConfig, RunStatus};

fn fixture_file(name: &str, file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).join(format!("{file}.json"))
}

fn config(name: &str, out: &Path) -> PipelineConfig {
    PipelineConfig {
        conflict_spec: Some(fixture_file(name, "spec")),
        overrides: Some(fixture_file(name, "overrides")),
        ..PipelineConfig::new(fixture_file(name, "devices"), out)
    }
}

#[test]
fn seeded_conflicts_converge_and_replay_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["heater_ac", "light", "desk_lamp"] {
        let cfg = PipelineConfig { rules: Some(fixture_file(name, "rules")), ..config(name, tmp.path()) };
        let run = run_pipeline(&cfg, &MockBackend).unwrap();
        assert_eq!(run.summary.status, RunStatus::ConflictFree, "{name}: {:?}", run.summary);
        assert!(run.summary.iterations >= 2 && run.summary.iterations <= 3, "{name}");
        assert!(run.reports.is_empty());

        let replay = replay_ledger(&run.dir).unwrap();
        assert!(replay.is_exact(), "{name}: {replay:?}");
        assert_eq!(replay.iterations.len(), run.summary.iterations);
    }
}

#[test]
fn generated_rules_converge() {
    let tmp = tempfile::tempdir().unwrap();
    let run = run_pipeline(&config("heater_ac", tmp.path()), &MockBackend).unwrap();
    assert_eq!(run.summary.status, RunStatus::ConflictFree);
    assert!(run.summary.iterations <= 3);
    let reader = LedgerReader::open(&run.dir).unwrap();
    assert!(reader.contains("iterations/1/generation/prompt.txt"));
    assert_eq!(reader.verify(), Vec::<String>::new());
}

#[test]
fn conflict_free_seed_needs_no_model() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        rules: Some(fixture_file("case_study", "rules")),
        logic_code: false,
        ..config("case_study", tmp.path())
    };
    let backend = ScriptedBackend::new(Vec::new());
    let run = run_pipeline(&cfg, &backend).unwrap();
    assert_eq!(run.summary.status, RunStatus::ConflictFree);
    assert_eq!(run.summary.iterations, 1);
    assert_eq!(run.summary.llm_calls, 0);
    assert!(backend.prompts().is_empty());
}

#[test]
fn one_iteration_bound_keeps_the_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        rules: Some(fixture_file("heater_ac", "rules")),
        max_iterations: 1,
        ..config("heater_ac", tmp.path())
    };
    let run = run_pipeline(&cfg, &MockBackend).unwrap();
    assert_eq!(run.summary.status, RunStatus::Bounded);
    assert_eq!(run.reports.len(), 2);
    assert_eq!(run.summary.conflict_count, 2);
}

#[test]
fn runs_are_deterministic_apart_from_the_id() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_pipeline(&config("heater_ac", tmp.path()), &MockBackend).unwrap();
    let b = run_pipeline(&config("heater_ac", tmp.path()), &MockBackend).unwrap();
    assert_ne!(a.summary.run_id, b.summary.run_id);
    for rel in ["iterations/1/rules.json", "iterations/1/report.json", "iterations/2/system.maude", "final/rules.json"] {
        assert_eq!(fs::read(a.dir.join(rel)).unwrap(), fs::read(b.dir.join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn edited_ledgers_are_detected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig { rules: Some(fixture_file("light", "rules")), ..config("light", tmp.path()) };
    let run = run_pipeline(&cfg, &MockBackend).unwrap();
    fs::write(run.dir.join("iterations/1/report.json"), "{}").unwrap();
    let replay = replay_ledger(&run.dir).unwrap();
    assert!(!replay.is_exact());
    assert_eq!(replay.tampered, vec!["iterations/1/report.json".to_string()]);
}

#[test]
fn manuals_drive_extraction() {
    let tmp = tempfile::tempdir().unwrap();
    let manuals = tmp.path().join("manuals");
    fs::create_dir(&manuals).unwrap();
    fs::write(manuals.join("light.txt"), "This smart light can be switched on and off and dimmed.\n").unwrap();
    let devices = tmp.path().join("devices.json");
    fs::write(&devices, r#"{"light1": {"type": "light", "location": "bedroom"}}"#).unwrap();
    let cfg = PipelineConfig {
        manuals: Some(manuals),
        logic_code: false,
        ..PipelineConfig::new(&devices, tmp.path().join("runs"))
    };
    let run = run_pipeline(&cfg, &MockBackend).unwrap();
    let resolved = fs::read_to_string(run.dir.join("resolved/devices.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&resolved).unwrap();
    let mut states: Vec<&str> =
        doc["light1"]["state"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
    states.sort();
    assert_eq!(states, ["high", "low", "off", "on"]);
    assert!(LedgerReader::open(&run.dir).unwrap().contains("inputs/manuals/light.txt"));
}

#[test]
fn unusable_answers_fail_the_run_after_repairs() {
    let tmp = tempfile::tempdir().unwrap();
    let answers: Vec<Result<String, BackendError>> = (0..3).map(|_| Ok("no idea".to_string())).collect();
    let backend = ScriptedBackend::new(answers);
    let run = run_pipeline(&config("heater_ac", tmp.path()), &backend).unwrap();
    assert_eq!(run.summary.status, RunStatus::Failed);
    assert_eq!(run.summary.llm_calls, 3);
    let prompts = backend.prompts();
    assert!(prompts[1].context.last().unwrap().contains("no JSON object"));
}
