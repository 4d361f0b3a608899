//! Integration tests for the pipeline: annotation round trips, full runs on
//! mock fleets, replay, and the CLI binary surface.

use std::path::{Path, PathBuf};
use std::process::Command;

use specdiff::gen::TestMix;
use specdiff::pipeline::{
    cmd_annotate, cmd_replay, cmd_run, ClassifierChoice, FleetSource, OracleMode, RunSettings,
};

fn data(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(path)
}

fn settings(spec: &str, scenario_path: &Path, mix: TestMix, seed: u64) -> RunSettings {
    RunSettings {
        spec_path: data(spec),
        sidecar_path: None,
        rules_path: None,
        fleet: FleetSource::Scenario(scenario_path.to_path_buf()),
        mix,
        seed,
        oracle: OracleMode::StubFalse,
        report_dir: None,
        threshold_epochs: 5,
        skip_readiness: false,
        timeout_ms: None,
    }
}

#[test]
fn annotate_writes_policies_and_is_byte_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let spec_copy = dir.path().join("el_api.json");
    std::fs::copy(data("specs/el_api.json"), &spec_copy).unwrap();

    let (annotated_path, summary) = cmd_annotate(&spec_copy, ClassifierChoice::Rule).unwrap();
    let first = std::fs::read_to_string(&annotated_path).unwrap();
    assert!(first.contains("\"x-consistency-policy\": \"must-identical\""));
    assert!(summary.entries.iter().any(|(method, path, policy, _)| {
        method == "eth_getBalance" && path == "/" && policy.as_str() == "must-identical"
    }));

    // Annotating the annotated file changes nothing, byte for byte.
    let (second_path, summary2) = cmd_annotate(&annotated_path, ClassifierChoice::Rule).unwrap();
    let second = std::fs::read_to_string(&second_path).unwrap();
    assert_eq!(first, second);
    assert!(summary2.entries.iter().all(|(_, _, _, preserved)| *preserved));
}

#[test]
fn every_shipped_corpus_document_round_trips() {
    use specdiff::spec::{emit::spec_to_string, parse_spec};
    for name in
        ["specs/el_api.json", "specs/cl_api.json", "specs/el_labeled.json", "specs/cl_publish.json"]
    {
        let text = std::fs::read_to_string(data(name)).unwrap();
        let parsed = parse_spec(&text).unwrap();
        let emitted = spec_to_string(&parsed);
        let reparsed = parse_spec(&emitted).unwrap();
        assert_eq!(parsed, reparsed, "round trip failed for {name}");
    }
}

#[test]
fn clean_fleet_run_exits_zero_with_no_findings() {
    let mix = TestMix { invalid: 2, valid: 2, semantic: 2 };
    let mut s = settings("specs/el_api.json", &data("scenarios/clean_el.json"), mix, 11);
    s.sidecar_path = Some(data("specs/el_api.semantic.json"));
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.exit_code, 0);
    assert_eq!(outcome.report.divergence_groups, 0, "clean baseline has zero divergences");
    assert!(outcome.report.findings.is_empty(), "findings: {:?}", outcome.report.findings);
    assert_eq!(outcome.report.total_requests, 6 * 8);
}

#[test]
fn clean_cl_fleet_is_also_divergence_free() {
    let mix = TestMix { invalid: 2, valid: 2, semantic: 2 };
    let mut s = settings("specs/cl_api.json", &data("scenarios/clean_cl.json"), mix, 12);
    s.sidecar_path = Some(data("specs/cl_api.semantic.json"));
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.exit_code, 0);
    assert_eq!(outcome.report.divergence_groups, 0);
}

#[test]
fn single_injection_yields_one_deduplicated_finding_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("one_bug.json");
    std::fs::write(
        &scenario,
        serde_json::json!({
            "chain_seed": 7,
            "node_count": 3,
            "layer": "el",
            "injections": [{
                "node_selector": 1,
                "method": "eth_blockNumber",
                "action": {"wrong_value": {"path": "/result", "value": "0x9999"}}
            }]
        })
        .to_string(),
    )
    .unwrap();

    let mix = TestMix { invalid: 0, valid: 3, semantic: 0 };
    let s = settings("specs/el_api.json", &scenario, mix, 3);
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.exit_code, 2);
    assert_eq!(outcome.report.findings.len(), 1, "multiple hits collapse into one group");
    let finding = &outcome.report.findings[0];
    assert_eq!(finding.method, "eth_blockNumber");
    assert_eq!(finding.field_path, "/result");
    assert_eq!(finding.occurrences, 3);
    assert_eq!(finding.example_records.len(), 3);
}

#[test]
fn report_artifacts_are_written_when_a_report_dir_is_set() {
    let dir = tempfile::tempdir().unwrap();
    let mix = TestMix { invalid: 1, valid: 1, semantic: 0 };
    let mut s = settings("specs/el_api.json", &data("scenarios/clean_el.json"), mix, 5);
    s.report_dir = Some(dir.path().to_path_buf());
    let outcome = cmd_run(&s).unwrap();
    assert_eq!(outcome.report_paths.len(), 3);
    for path in &outcome.report_paths {
        assert!(path.exists(), "missing artifact {}", path.display());
    }
    let markdown = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(markdown.contains("Differential run report"));
}

#[test]
fn replay_reproduces_findings_and_checks_fleet_shape() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("one_bug.json");
    std::fs::write(
        &scenario,
        serde_json::json!({
            "chain_seed": 9,
            "node_count": 3,
            "layer": "el",
            "injections": [{
                "node_selector": 2,
                "method": "eth_blockNumber",
                "action": {"wrong_value": {"path": "/result", "value": "0x9999"}}
            }]
        })
        .to_string(),
    )
    .unwrap();

    let mix = TestMix { invalid: 0, valid: 2, semantic: 0 };
    let mut s = settings("specs/el_api.json", &scenario, mix, 8);
    s.report_dir = Some(dir.path().join("run"));
    let original = cmd_run(&s).unwrap();
    assert_eq!(original.exit_code, 2);
    let roundlog = dir.path().join("run/roundlog.jsonl");

    // Same deterministic scenario, fresh fleet: identical findings, no
    // byte drift.
    let replay = cmd_replay(
        &roundlog,
        &FleetSource::Scenario(scenario.clone()),
        &data("specs/el_api.json"),
        None,
        &OracleMode::StubFalse,
        false,
        None,
    )
    .unwrap();
    assert_eq!(replay.exit_code, 2);
    assert!(replay.replay_diffs.is_empty(), "diffs: {:?}", replay.replay_diffs);
    assert_eq!(replay.report.findings.len(), original.report.findings.len());
    assert_eq!(replay.report.findings[0].field_path, original.report.findings[0].field_path);

    // A fleet with a different endpoint count is rejected up front.
    let bigger = dir.path().join("bigger.json");
    std::fs::write(
        &bigger,
        serde_json::json!({"chain_seed": 9, "node_count": 4, "layer": "el"}).to_string(),
    )
    .unwrap();
    let err = cmd_replay(
        &roundlog,
        &FleetSource::Scenario(bigger),
        &data("specs/el_api.json"),
        None,
        &OracleMode::StubFalse,
        false,
        None,
    )
    .unwrap_err();
    assert!(err.to_string().contains("fleet mismatch"), "got: {err}");

    // An empty round log replays to an empty report.
    let empty_log = dir.path().join("empty.jsonl");
    std::fs::write(&empty_log, "").unwrap();
    let outcome = cmd_replay(
        &empty_log,
        &FleetSource::Scenario(scenario),
        &data("specs/el_api.json"),
        None,
        &OracleMode::StubFalse,
        false,
        None,
    )
    .unwrap();
    assert_eq!(outcome.exit_code, 0);
    assert!(outcome.report.findings.is_empty());
}

#[test]
fn cli_generate_emits_replayable_jsonl() {
    let output = Command::new(env!("CARGO_BIN_EXE_specdiff"))
        .args([
            "generate",
            "--spec",
            data("specs/el_api.json").to_str().unwrap(),
            "--mix",
            "1,1,0",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let requests = specdiff::gen::requests_from_jsonl(&stdout).unwrap();
    assert_eq!(requests.len(), 2 * 8);
    assert!(requests.iter().all(|r| r.body.get("jsonrpc").is_some()));
}

#[test]
fn cli_config_file_fills_gaps_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"mix": "1,0,0", "seed": 5}"#).unwrap();

    // Config supplies mix and seed when flags are absent.
    let output = Command::new(env!("CARGO_BIN_EXE_specdiff"))
        .args([
            "generate",
            "--spec",
            data("specs/el_api.json").to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let from_config =
        specdiff::gen::requests_from_jsonl(&String::from_utf8(output.stdout).unwrap()).unwrap();
    assert_eq!(from_config.len(), 8, "one invalid request per method");
    assert!(from_config.iter().all(|r| r.seed == 5));

    // An explicit flag overrides the config value.
    let output = Command::new(env!("CARGO_BIN_EXE_specdiff"))
        .args([
            "generate",
            "--spec",
            data("specs/el_api.json").to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--mix",
            "0,2,0",
            "--seed",
            "9",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let from_flags =
        specdiff::gen::requests_from_jsonl(&String::from_utf8(output.stdout).unwrap()).unwrap();
    assert_eq!(from_flags.len(), 16);
    assert!(from_flags.iter().all(|r| r.seed == 9));
}

#[test]
fn cli_facts_extracts_against_a_scenario_fleet() {
    let output = Command::new(env!("CARGO_BIN_EXE_specdiff"))
        .args([
            "facts",
            "--scenario",
            data("scenarios/clean_el.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let store: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("fact store JSON on stdout");
    assert_eq!(store["current_block"], serde_json::json!(64));
    assert!(store["facts"]["address"].is_array());
}

#[test]
fn cli_run_reports_exit_codes() {
    let output = Command::new(env!("CARGO_BIN_EXE_specdiff"))
        .args([
            "run",
            "--spec",
            data("specs/el_api.json").to_str().unwrap(),
            "--scenario",
            data("scenarios/clean_el.json").to_str().unwrap(),
            "--mix",
            "1,1,0",
            "--seed",
            "4",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));

    let output = Command::new(env!("CARGO_BIN_EXE_specdiff"))
        .args(["run", "--spec", "missing.json", "--fleet", "also-missing.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "config errors exit 1");
}
