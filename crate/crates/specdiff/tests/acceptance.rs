//! Acceptance suite. One test per criterion; each prints a PASS line with
//! the criterion number once its assertions hold.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde_json::{json, Value};
use specdiff::facts::{extract_facts, mutate_semantic, FactRule, FactStore};
use specdiff::filter::{compute_fdr, diff_records, format_fdr, DivergenceKind, VerdictKind};
use specdiff::gen::{gen_batch, request_passes_validator, TestMix, Validity};
use specdiff::harness::{run_round, ResponseRecord, RoundOptions};
use specdiff::mock::{spawn_fleet, FleetScenario, GroundTruth};
use specdiff::pipeline::{
    cmd_run, load_spec, FleetSource, OracleMode, RunSettings, DEFAULT_FACT_RULES,
};
use specdiff::report::normalize_timestamps;
use specdiff::spec::Transport;
use specdiff::util::seeded_rng;

fn data(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(path)
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

fn labeled_settings(oracle: OracleMode, seed: u64) -> RunSettings {
    RunSettings {
        spec_path: data("specs/el_labeled.json"),
        sidecar_path: Some(data("specs/el_labeled.semantic.json")),
        rules_path: None,
        fleet: FleetSource::Scenario(data("scenarios/labeled_fdr.json")),
        mix: TestMix::default(),
        seed,
        oracle,
        report_dir: None,
        threshold_epochs: 5,
        skip_readiness: false,
        timeout_ms: None,
    }
}

/// Criterion 1: over 10,000 generated requests, every syntactic-valid
/// request passes the independent validator on all params and every
/// syntactic-invalid request fails it or carries an undefined-field note.
#[test]
fn acceptance_1_generation_validity() {
    let started = Instant::now();
    let spec = load_spec(&data("specs/el_api.json"), None).unwrap();
    let per_method = 625; // 8 methods x 1,250 requests = 10,000
    let mix = TestMix { invalid: per_method, valid: per_method, semantic: 0 };
    let batch = gen_batch(&spec, mix, 20_250_809, None).unwrap();
    assert_eq!(batch.requests.len(), 10_000);

    let mut checked_valid = 0u64;
    let mut checked_invalid = 0u64;
    for request in &batch.requests {
        let method = spec.method(&request.method).unwrap();
        match request.validity {
            Validity::SyntacticValid | Validity::SemanticValid => {
                assert!(
                    request_passes_validator(method, request),
                    "valid request {} failed the validator: {}",
                    request.request_id,
                    request.to_jsonl()
                );
                checked_valid += 1;
            }
            Validity::SyntacticInvalid => {
                let undefined = request
                    .fault_note
                    .as_deref()
                    .map(|note| note.starts_with("undefined field"))
                    .unwrap_or(false);
                assert!(
                    undefined || !request_passes_validator(method, request),
                    "invalid request {} passed the validator without an undefined-field note: {}",
                    request.request_id,
                    request.to_jsonl()
                );
                checked_invalid += 1;
            }
        }
    }
    assert_eq!(checked_valid, 5_000);
    assert_eq!(checked_invalid, 5_000);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget is 60 s");
    println!(
        "ACCEPTANCE 1 (generation validity, 10,000 requests in {:.1?}): PASS",
        elapsed
    );
}

/// Criterion 2: every batch with invalid count >= 3 on a method where all
/// three violation categories apply contains all three.
#[test]
fn acceptance_2_invalid_category_coverage() {
    let spec = load_spec(&data("specs/el_api.json"), None).unwrap();
    let eligible = ["eth_getBalance", "eth_getTransactionCount", "eth_getBlockByNumber"];
    for seed in 0..20 {
        let batch =
            gen_batch(&spec, TestMix { invalid: 3, valid: 0, semantic: 0 }, seed, None).unwrap();
        for method in eligible {
            let notes: Vec<&str> = batch
                .requests
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| r.fault_note.as_deref())
                .collect();
            assert_eq!(notes.len(), 3);
            for prefix in ["undefined field", "missing required", "constraint violation"] {
                assert!(
                    notes.iter().any(|note| note.starts_with(prefix)),
                    "seed {seed}, {method}: category {prefix:?} missing in {notes:?}"
                );
            }
        }
    }
    println!("ACCEPTANCE 2 (invalid-category coverage): PASS");
}

fn assert_success(record: &ResponseRecord, transport: Transport, context: &str) {
    assert_eq!(record.http_status, Some(200), "{context}: status {:?}", record.http_status);
    let body = record.body.as_ref().expect("parsed body");
    match transport {
        Transport::JsonrpcPost => {
            assert!(
                body.get("error").map_or(true, Value::is_null),
                "{context}: error response {body}"
            );
            assert!(
                body.get("result").map_or(false, |r| !r.is_null()),
                "{context}: null result {body}"
            );
        }
        _ => {}
    }
}

/// Criterion 3: on the clean mock fleet every semantically enriched request
/// resolves to an existing entity, and 10,000 slot mutations with a current
/// slot of 100 all land in [1, 100].
#[test]
fn acceptance_3_semantic_soundness() {
    let rt = rt();

    // Execution-layer round.
    rt.block_on(async {
        let scenario =
            FleetScenario::from_json(&std::fs::read_to_string(data("scenarios/clean_el.json")).unwrap())
                .unwrap();
        let fleet = spawn_fleet(&scenario).await.unwrap();
        let spec =
            load_spec(&data("specs/el_api.json"), Some(&data("specs/el_api.semantic.json")))
                .unwrap();
        let rules: Vec<FactRule> = serde_json::from_str(DEFAULT_FACT_RULES).unwrap();
        let (facts, _) = extract_facts(&rules, &fleet.endpoints[0], Some(&spec)).await.unwrap();
        let batch = gen_batch(
            &spec,
            TestMix { invalid: 0, valid: 0, semantic: 10 },
            31,
            Some(&facts),
        )
        .unwrap();
        let options = RoundOptions { threshold_epochs: 5, ..Default::default() };
        let round = run_round(&fleet.endpoints, &batch.requests, &options).await.unwrap();

        let mut semantic_seen = 0u64;
        for entry in &round.entries {
            if entry.request.validity != Validity::SemanticValid {
                continue;
            }
            semantic_seen += 1;
            for record in &entry.records {
                assert_success(
                    record,
                    entry.request.transport,
                    &format!("{} request {}", entry.request.method, entry.request.request_id),
                );
            }
        }
        // Seven of eight methods carry semantic bindings.
        assert_eq!(semantic_seen, 70, "semantic share of the batch");
    });

    // Consensus-layer round.
    rt.block_on(async {
        let scenario =
            FleetScenario::from_json(&std::fs::read_to_string(data("scenarios/clean_cl.json")).unwrap())
                .unwrap();
        let fleet = spawn_fleet(&scenario).await.unwrap();
        let spec =
            load_spec(&data("specs/cl_api.json"), Some(&data("specs/cl_api.semantic.json")))
                .unwrap();
        let rules: Vec<FactRule> = serde_json::from_str(DEFAULT_FACT_RULES).unwrap();
        let (facts, _) = extract_facts(&rules, &fleet.endpoints[0], Some(&spec)).await.unwrap();
        let batch = gen_batch(
            &spec,
            TestMix { invalid: 0, valid: 0, semantic: 10 },
            32,
            Some(&facts),
        )
        .unwrap();
        let options = RoundOptions { threshold_epochs: 5, ..Default::default() };
        let round = run_round(&fleet.endpoints, &batch.requests, &options).await.unwrap();
        let mut semantic_seen = 0u64;
        for entry in &round.entries {
            if entry.request.validity != Validity::SemanticValid {
                continue;
            }
            semantic_seen += 1;
            for record in &entry.records {
                assert_eq!(
                    record.http_status,
                    Some(200),
                    "{} request {} got {:?}",
                    entry.request.method,
                    entry.request.request_id,
                    record.http_status
                );
            }
        }
        assert_eq!(semantic_seen, 10, "only the header lookup is enrichable");
    });

    // Slot-range soundness, exact bounds.
    let mut store = FactStore::default();
    store.insert("state_id.slot", vec![json!(100u64)]);
    let mut rng = seeded_rng(100);
    let mut seen_low = false;
    let mut seen_high = false;
    for _ in 0..10_000 {
        let slot = mutate_semantic("state_id.slot", &store, &mut rng)
            .unwrap()
            .as_u64()
            .unwrap();
        assert!((1..=100).contains(&slot), "slot {slot} outside [1, 100]");
        seen_low |= slot == 1;
        seen_high |= slot == 100;
    }
    assert!(seen_low && seen_high, "range endpoints never sampled");
    println!("ACCEPTANCE 3 (semantic soundness): PASS");
}

/// Independent reference comparator for criterion 4, deliberately written
/// as its own recursion over value pairs.
fn reference_diff(a: &Value, b: &Value) -> BTreeSet<(String, &'static str)> {
    fn type_name(v: &Value) -> &'static str {
        match v {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Number(_) => "number",
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        }
    }
    fn go(path: String, a: Option<&Value>, b: Option<&Value>, out: &mut BTreeSet<(String, &'static str)>) {
        let display = |p: &str| if p.is_empty() { "/".to_string() } else { p.to_string() };
        match (a, b) {
            (None, None) => {}
            (Some(_), None) | (None, Some(_)) => {
                // The acceptance spec has an unconstrained result schema, so
                // presence differences always read as extra fields.
                out.insert((display(&path), "extra_field"));
            }
            (Some(x), Some(y)) if x == y => {}
            (Some(Value::Object(xo)), Some(Value::Object(yo))) => {
                let keys: BTreeSet<&String> = xo.keys().chain(yo.keys()).collect();
                for key in keys {
                    go(format!("{path}/{key}"), xo.get(key), yo.get(key), out);
                }
            }
            (Some(Value::Array(xa)), Some(Value::Array(ya))) => {
                for index in 0..xa.len().max(ya.len()) {
                    go(format!("{path}/{index}"), xa.get(index), ya.get(index), out);
                }
            }
            (Some(x), Some(y)) => {
                if type_name(x) == type_name(y) {
                    out.insert((display(&path), "value_mismatch"));
                } else {
                    out.insert((display(&path), "type_mismatch"));
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(String::new(), Some(a), Some(b), &mut out);
    out
}

fn random_value<R: Rng>(rng: &mut R, depth: u32) -> Value {
    let top = if depth == 0 { 4 } else { 6 };
    match rng.gen_range(0..top) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::from(rng.gen_range(0i64..5)),
        3 => Value::String(format!("s{}", rng.gen_range(0..5))),
        4 => {
            let len = rng.gen_range(0..4);
            Value::Array((0..len).map(|_| random_value(rng, depth - 1)).collect())
        }
        _ => {
            let len = rng.gen_range(0..4);
            let mut obj = serde_json::Map::new();
            for _ in 0..len {
                obj.insert(format!("k{}", rng.gen_range(0..6)), random_value(rng, depth - 1));
            }
            Value::Object(obj)
        }
    }
}

/// Mutates a copy so pairs overlap structurally instead of differing
/// everywhere.
fn perturb<R: Rng>(rng: &mut R, value: &Value, depth: u32) -> Value {
    if rng.gen_bool(0.3) {
        return random_value(rng, depth);
    }
    match value {
        Value::Object(obj) => {
            let mut out = obj.clone();
            if rng.gen_bool(0.4) {
                out.insert(format!("k{}", rng.gen_range(0..6)), random_value(rng, 1));
            }
            if !out.is_empty() && rng.gen_bool(0.4) {
                let index = rng.gen_range(0..out.len());
                let key = out.keys().nth(index).unwrap().clone();
                if rng.gen_bool(0.5) {
                    out.shift_remove(&key);
                } else {
                    let child = out[&key].clone();
                    let mutated = perturb(rng, &child, depth.saturating_sub(1));
                    out.insert(key, mutated);
                }
            }
            Value::Object(out)
        }
        Value::Array(items) => {
            let mut out = items.clone();
            if rng.gen_bool(0.3) {
                out.push(random_value(rng, 1));
            } else if !out.is_empty() {
                let index = rng.gen_range(0..out.len());
                let mutated = perturb(rng, &out[index].clone(), depth.saturating_sub(1));
                out[index] = mutated;
            }
            Value::Array(out)
        }
        other => {
            if rng.gen_bool(0.5) {
                other.clone()
            } else {
                random_value(rng, 1)
            }
        }
    }
}

/// Criterion 4: the structural diff agrees with the brute-force comparator
/// on 1,000 random JSON pairs of depth <= 5: identical path and kind sets.
#[test]
fn acceptance_4_diff_oracle_equivalence() {
    let spec = specdiff::spec::parse_spec(
        r#"{"methods": [{"name": "m", "transport": "rest_get",
             "path_template": "/m", "params": [],
             "result": {"type": "any"}}]}"#,
    )
    .unwrap();
    let record = |endpoint_id: u32, body: &Value| ResponseRecord {
        endpoint_id,
        request_id: 1,
        http_status: Some(200),
        body: Some(body.clone()),
        raw_body: serde_json::to_vec(body).unwrap(),
        transport_error: None,
        latency_ms: 0,
    };

    let mut rng = seeded_rng(4);
    for round in 0..1_000 {
        let a = random_value(&mut rng, 5);
        let b = if rng.gen_bool(0.6) { perturb(&mut rng, &a, 5) } else { random_value(&mut rng, 5) };

        let records = vec![record(0, &a), record(1, &b)];
        let observed: BTreeSet<(String, &'static str)> = diff_records(&records, &spec, "m")
            .into_iter()
            .map(|d| {
                let kind = match d.kind {
                    DivergenceKind::ValueMismatch => "value_mismatch",
                    DivergenceKind::MissingField => "missing_field",
                    DivergenceKind::ExtraField => "extra_field",
                    DivergenceKind::TypeMismatch => "type_mismatch",
                    DivergenceKind::StatusMismatch => "status_mismatch",
                    DivergenceKind::Availability => "availability",
                };
                (d.field_path, kind)
            })
            .collect();
        let expected = reference_diff(&a, &b);
        assert_eq!(
            observed, expected,
            "round {round}: diff disagrees with the reference\na = {a}\nb = {b}"
        );
    }
    println!("ACCEPTANCE 4 (diff-oracle equivalence, 1,000 pairs): PASS");
}

/// Criterion 5: the labeled scenario (10 genuine, 10 allowed-divergent, 10
/// semantically equivalent) reports exactly the 10 genuine findings; FDR is
/// 0.00% with the filter and 66.67% without.
#[test]
fn acceptance_5_injected_bug_scenario() {
    let started = Instant::now();
    let lookup = data("oracle/lookup_pairs.json");
    let settings = labeled_settings(OracleMode::StubLookup(lookup), 1);
    let outcome = cmd_run(&settings).unwrap();
    let report = &outcome.report;

    let scenario: FleetScenario =
        serde_json::from_str(&std::fs::read_to_string(data("scenarios/labeled_fdr.json")).unwrap())
            .unwrap();
    let genuine_labels: BTreeSet<(String, String)> = scenario
        .labels
        .iter()
        .filter(|l| l.label == GroundTruth::Genuine)
        .map(|l| (l.method.clone(), l.path.clone()))
        .collect();

    assert_eq!(report.divergence_groups, 30, "expected one group per injected path");
    assert_eq!(report.findings.len(), 10, "exactly the genuine findings: {:#?}",
        report.findings.iter().map(|f| (&f.method, &f.field_path, f.verdict)).collect::<Vec<_>>());
    for finding in &report.findings {
        assert!(
            genuine_labels.contains(&(finding.method.clone(), finding.field_path.clone())),
            "unexpected finding {} {}",
            finding.method,
            finding.field_path
        );
    }
    assert_eq!(report.filtered.allowed, 10);
    assert_eq!(report.filtered.semantic_equivalent, 10);
    assert_eq!(report.filtered.environmental, 0);

    let metrics = report.metrics.as_ref().expect("labeled scenario has metrics");
    assert_eq!(metrics.tp_with_filter, 10);
    assert_eq!(metrics.fp_with_filter, 0);
    assert_eq!(metrics.fdr_with_filter.as_deref(), Some("0.00%"));
    assert_eq!(metrics.tp_without_filter, 10);
    assert_eq!(metrics.fp_without_filter, 20);
    assert_eq!(metrics.fdr_without_filter.as_deref(), Some("66.67%"));
    assert_eq!(outcome.exit_code, 2);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}, budget is 120 s");
    println!("ACCEPTANCE 5 (injected-bug scenario, FDR 0.00% vs 66.67% in {elapsed:.1?}): PASS");
}

/// Criterion 6: the published FDR arithmetic anchors reproduce to two
/// decimals.
#[test]
fn acceptance_6_fdr_anchors() {
    assert_eq!(format_fdr(compute_fdr(18, 7).unwrap()), "28.00%");
    assert_eq!(format_fdr(compute_fdr(18, 34).unwrap()), "65.38%");
    println!("ACCEPTANCE 6 (FDR arithmetic anchors 28.00% / 65.38%): PASS");
}

/// Criterion 7: a spec demanding exactly 32 proof entries against servers
/// requiring 33 yields uniform rejection, flagged as a suspected
/// specification defect.
#[test]
fn acceptance_7_spec_bug_detectability() {
    let settings = RunSettings {
        spec_path: data("specs/cl_publish.json"),
        sidecar_path: None,
        rules_path: None,
        fleet: FleetSource::Scenario(data("scenarios/specbug_cl.json")),
        mix: TestMix { invalid: 2, valid: 3, semantic: 0 },
        seed: 77,
        oracle: OracleMode::StubFalse,
        report_dir: None,
        threshold_epochs: 5,
        skip_readiness: false,
        timeout_ms: None,
    };
    let outcome = cmd_run(&settings).unwrap();
    let report = &outcome.report;

    assert!(report.findings.is_empty(), "uniform rejection is not a divergence");
    assert_eq!(outcome.exit_code, 0);
    let suspect = report
        .spec_defect_suspects
        .iter()
        .find(|s| s.method == "publishBlock")
        .expect("publishBlock flagged as a suspected specification defect");
    assert_eq!(suspect.rejected_requests, 3, "all spec-conformant requests rejected");
    assert!(
        suspect.messages.iter().any(|m| m.contains("expected 33 and 32 found")),
        "messages: {:?}",
        suspect.messages
    );
    println!("ACCEPTANCE 7 (specification-bug detectability): PASS");
}

/// Criterion 8: identical (spec, scenario, mix, seed, stub oracle) produce
/// byte-identical report JSON modulo the timestamp.
#[test]
fn acceptance_8_determinism() {
    let lookup = data("oracle/lookup_pairs.json");
    let first = cmd_run(&labeled_settings(OracleMode::StubLookup(lookup.clone()), 1)).unwrap();
    let second = cmd_run(&labeled_settings(OracleMode::StubLookup(lookup), 1)).unwrap();
    let a = normalize_timestamps(&first.report_json);
    let b = normalize_timestamps(&second.report_json);
    assert_eq!(a, b, "reports differ beyond the timestamp");
    println!("ACCEPTANCE 8 (byte-identical reports modulo timestamps): PASS");
}

/// Criterion 9: with the always-false stub nothing beyond the canonical
/// tier is filtered as semantically equivalent, and with the oracle
/// unavailable every residual divergence is a genuine bug with the
/// documented reason.
#[test]
fn acceptance_9_conservative_oracle_degradation() {
    // Always-false stub: the three error-message groups are no longer
    // filtered, canonical reformats still are, without any oracle credit.
    let outcome = cmd_run(&labeled_settings(OracleMode::StubFalse, 1)).unwrap();
    let report = &outcome.report;
    assert_eq!(report.divergence_groups, 30);
    assert_eq!(report.findings.len(), 13, "10 genuine + 3 message groups");
    assert_eq!(report.filtered.semantic_equivalent, 7, "canonical tier only");
    assert_eq!(report.filtered.allowed, 10);

    let run = cmd_run(&labeled_settings(OracleMode::Unavailable, 1)).unwrap();
    let report = &run.report;
    assert_eq!(report.findings.len(), 13);
    let degraded: Vec<&specdiff::report::FindingGroup> = report
        .findings
        .iter()
        .filter(|f| f.field_path == "/error/message")
        .collect();
    assert_eq!(degraded.len(), 3);
    for finding in degraded {
        assert_eq!(finding.verdict, VerdictKind::GenuineBug);
        assert_eq!(finding.reason, "oracle unavailable — conservative");
    }
    assert_eq!(report.filtered.semantic_equivalent, 7, "canonical tier unaffected");
    println!("ACCEPTANCE 9 (conservative oracle degradation): PASS");
}
