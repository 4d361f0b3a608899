//! End-to-end orchestration: the operations behind the CLI subcommands,
//! shaped as library functions so tests and examples drive them directly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::facts::{extract_facts, FactError, FactRule, FactStore};
use crate::filter::oracle::UnavailableOracle;
use crate::filter::{
    classify_all, diff_records, ClassifyContext, EquivalenceOracle, ExternalOracle, Finding,
    OracleBackendConfig, StubFalseOracle, StubLookupOracle,
};
use crate::gen::{gen_batch, requests_to_jsonl, Batch, GenError, TestMix, TestRequest};
use crate::harness::{
    check_readiness, fleet_from_json, run_round, Endpoint, HarnessError, ReadinessReport,
    RoundLog, RoundOptions,
};
use crate::mock::server::{spawn_fleet, FleetHandle};
use crate::mock::{FleetScenario, MockError, PathLabel};
use crate::report::{build_report, render_markdown, ReportInputs, RunReport};
use crate::spec::policy::{ClassifierError, FieldContext, PolicyClassifier, PolicyDecision};
use crate::spec::{
    annotate_policies, emit::spec_to_string, parse_spec, AnnotationSummary, ApiSpec,
    ConsistencyPolicy, RuleClassifier, SpecError,
};

/// Fact rules shipped with the tool, mirroring the standard parameter-type
/// to source-API table.
pub const DEFAULT_FACT_RULES: &str = include_str!("../data/fact_rules.json");
const CLASSIFIER_PROMPT: &str = include_str!("../data/classifier_prompt.txt");

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Mock(#[from] MockError),
    #[error(transparent)]
    Facts(#[from] FactError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("malformed JSON in {context}: {message}")]
    Json { context: String, message: String },
    #[error("fleet mismatch: round log has {expected} records per request, fleet has {actual} endpoints")]
    FleetMismatch { expected: usize, actual: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

impl PipelineError {
    /// Configuration and environment failures exit 1; genuine findings are
    /// signaled by exit 2 from a successful run.
    pub fn exit_code(&self) -> i32 {
        1
    }
}

fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path)
        .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    }
    fs::write(path, contents)
        .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime builds")
}

/// Where the fleet comes from: an existing endpoint list or a mock-fleet
/// scenario spawned for the duration of the run.
#[derive(Debug, Clone)]
pub enum FleetSource {
    File(PathBuf),
    Scenario(PathBuf),
}

/// Which equivalence oracle backs the semantic tier.
#[derive(Debug, Clone)]
pub enum OracleMode {
    StubFalse,
    StubLookup(PathBuf),
    External(OracleBackendConfig),
    /// Always fails; exercises conservative degradation.
    Unavailable,
}

impl OracleMode {
    pub fn parse(text: &str, external: OracleBackendConfig) -> Result<OracleMode, PipelineError> {
        match text {
            "stub_false" => Ok(OracleMode::StubFalse),
            "external" => Ok(OracleMode::External(external)),
            "unavailable" => Ok(OracleMode::Unavailable),
            _ => match text.strip_prefix("stub_lookup:") {
                Some(path) => Ok(OracleMode::StubLookup(PathBuf::from(path))),
                None => Err(PipelineError::Config(format!(
                    "unknown oracle mode {text:?}; expected external, stub_false, stub_lookup:<file>"
                ))),
            },
        }
    }

    pub fn build(&self) -> Result<Box<dyn EquivalenceOracle + Send>, PipelineError> {
        match self {
            OracleMode::StubFalse => Ok(Box::new(StubFalseOracle)),
            OracleMode::Unavailable => Ok(Box::new(UnavailableOracle)),
            OracleMode::StubLookup(path) => {
                let text = read_file(path)?;
                let oracle = StubLookupOracle::from_json(&text).map_err(|e| {
                    PipelineError::Json {
                        context: path.display().to_string(),
                        message: e.to_string(),
                    }
                })?;
                Ok(Box::new(oracle))
            }
            OracleMode::External(config) => Ok(Box::new(ExternalOracle::new(config.clone()))),
        }
    }
}

/// Which classifier labels unannotated result fields.
pub enum ClassifierChoice {
    Rule,
    Oracle(OracleBackendConfig),
}

/// Policy classifier backed by the external model, one call per field with
/// a strict three-field output contract.
struct OraclePolicyClassifier {
    config: OracleBackendConfig,
    client: reqwest::blocking::Client,
}

impl OraclePolicyClassifier {
    fn new(config: OracleBackendConfig) -> Self {
        OraclePolicyClassifier {
            client: reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_millis(config.timeout_ms))
                .build()
                .expect("client builds"),
            config,
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyReply {
    policy: String,
    environmental: bool,
    #[allow(dead_code)]
    reason: String,
}

impl PolicyClassifier for OraclePolicyClassifier {
    fn classify(&self, ctx: &FieldContext<'_>) -> Result<PolicyDecision, ClassifierError> {
        let fail = |reason: String| ClassifierError {
            method: ctx.method.to_string(),
            field_path: ctx.field_path.clone(),
            reason,
        };
        let prompt = CLASSIFIER_PROMPT
            .replace("{{METHOD}}", ctx.method)
            .replace("{{SUMMARY}}", ctx.method_summary.unwrap_or("(none)"))
            .replace("{{FIELD_PATH}}", &ctx.field_path)
            .replace("{{TITLE}}", ctx.title.unwrap_or("(none)"))
            .replace("{{DESCRIPTION}}", ctx.description.unwrap_or("(none)"));
        let (system, user) = prompt.split_once("\n\n").unwrap_or(("", prompt.as_str()));

        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": system.trim_start_matches("System: ").trim()},
                {"role": "user", "content": user.trim()},
            ],
        });
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut request = self.client.post(&url).json(&body);
        if let Ok(token) = std::env::var(&self.config.auth_env) {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| fail(e.to_string()))?;
        if !response.status().is_success() {
            return Err(fail(format!("classifier backend returned {}", response.status())));
        }
        let payload: Value = response.json().map_err(|e| fail(e.to_string()))?;
        let content = payload
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| fail("no message content".to_string()))?;
        let reply: PolicyReply = serde_json::from_str(content.trim())
            .map_err(|e| fail(format!("malformed reply: {e}")))?;
        let policy = ConsistencyPolicy::parse(&reply.policy)
            .ok_or_else(|| fail(format!("unknown policy {:?}", reply.policy)))?;
        Ok(PolicyDecision { policy, environmental: reply.environmental })
    }
}

/// Parses, annotates, and writes `<spec>.annotated.json` next to the input.
/// No file is written if any field fails to classify.
pub fn cmd_annotate(
    spec_path: &Path,
    classifier: ClassifierChoice,
) -> Result<(PathBuf, AnnotationSummary), PipelineError> {
    let spec = parse_spec(&read_file(spec_path)?)?;
    let (annotated, summary) = match classifier {
        ClassifierChoice::Rule => annotate_policies(&spec, &RuleClassifier)?,
        ClassifierChoice::Oracle(config) => {
            annotate_policies(&spec, &OraclePolicyClassifier::new(config))?
        }
    };
    let stem = spec_path.file_stem().and_then(|s| s.to_str()).unwrap_or("spec");
    let out_path = spec_path.with_file_name(format!("{stem}.annotated.json"));
    write_file(&out_path, &spec_to_string(&annotated))?;
    Ok((out_path, summary))
}

/// Loads a spec, annotates unlabeled fields with the rule table, and
/// optionally applies a semantic-type sidecar.
pub fn load_spec(spec_path: &Path, sidecar_path: Option<&Path>) -> Result<ApiSpec, PipelineError> {
    let spec = parse_spec(&read_file(spec_path)?)?;
    let (mut spec, _) = annotate_policies(&spec, &RuleClassifier)?;
    if let Some(sidecar_path) = sidecar_path {
        let sidecar: indexmap::IndexMap<String, indexmap::IndexMap<String, String>> =
            serde_json::from_str(&read_file(sidecar_path)?).map_err(|e| PipelineError::Json {
                context: sidecar_path.display().to_string(),
                message: e.to_string(),
            })?;
        spec.apply_semantic_types(&sidecar)?;
    }
    Ok(spec)
}

fn load_rules(rules_path: Option<&Path>) -> Result<Vec<FactRule>, PipelineError> {
    let text = match rules_path {
        Some(path) => read_file(path)?,
        None => DEFAULT_FACT_RULES.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| PipelineError::Json {
        context: "fact rules".to_string(),
        message: e.to_string(),
    })
}

/// A spawned-or-loaded fleet, keeping any mock servers alive while in
/// scope.
pub struct ActiveFleet {
    pub endpoints: Vec<Endpoint>,
    pub labels: Vec<PathLabel>,
    handle: Option<FleetHandle>,
}

impl ActiveFleet {
    pub fn mock_handle(&self) -> Option<&FleetHandle> {
        self.handle.as_ref()
    }
}

pub fn acquire_fleet(
    rt: &tokio::runtime::Runtime,
    source: &FleetSource,
    timeout_override_ms: Option<u64>,
) -> Result<ActiveFleet, PipelineError> {
    let mut fleet = match source {
        FleetSource::File(path) => {
            let endpoints = fleet_from_json(&read_file(path)?).map_err(|e| {
                PipelineError::Json { context: path.display().to_string(), message: e.to_string() }
            })?;
            ActiveFleet { endpoints, labels: Vec::new(), handle: None }
        }
        FleetSource::Scenario(path) => {
            let scenario = FleetScenario::from_json(&read_file(path)?)?;
            let handle = rt.block_on(spawn_fleet(&scenario))?;
            ActiveFleet {
                endpoints: handle.endpoints.clone(),
                labels: scenario.labels.clone(),
                handle: Some(handle),
            }
        }
    };
    if let Some(timeout) = timeout_override_ms {
        for endpoint in &mut fleet.endpoints {
            endpoint.timeout_ms = timeout;
        }
    }
    if fleet.endpoints.is_empty() {
        return Err(PipelineError::Config("fleet has no endpoints".to_string()));
    }
    Ok(fleet)
}

/// Extracts facts from the designated reference endpoint (the first of the
/// fleet). Per-rule failures become warnings.
pub fn cmd_facts(
    fleet_source: &FleetSource,
    rules_path: Option<&Path>,
    spec: Option<&ApiSpec>,
) -> Result<(FactStore, Vec<String>), PipelineError> {
    let rt = runtime();
    let fleet = acquire_fleet(&rt, fleet_source, None)?;
    let rules = load_rules(rules_path)?;
    let (store, report) = rt.block_on(extract_facts(&rules, &fleet.endpoints[0], spec))?;
    let warnings = report
        .failed
        .iter()
        .map(|(param_type, reason)| format!("fact rule {param_type}: {reason}"))
        .collect();
    Ok((store, warnings))
}

/// Generates a batch, optionally enriching from a serialized fact store.
pub fn cmd_generate(
    spec_path: &Path,
    sidecar_path: Option<&Path>,
    mix: TestMix,
    seed: u64,
    facts_path: Option<&Path>,
) -> Result<(Batch, String), PipelineError> {
    let spec = load_spec(spec_path, sidecar_path)?;
    let facts: Option<FactStore> = match facts_path {
        Some(path) => Some(serde_json::from_str(&read_file(path)?).map_err(|e| {
            PipelineError::Json { context: path.display().to_string(), message: e.to_string() }
        })?),
        None => None,
    };
    let batch = gen_batch(&spec, mix, seed, facts.as_ref())?;
    let jsonl = requests_to_jsonl(&batch.requests);
    Ok((batch, jsonl))
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub spec_path: PathBuf,
    pub sidecar_path: Option<PathBuf>,
    pub rules_path: Option<PathBuf>,
    pub fleet: FleetSource,
    pub mix: TestMix,
    pub seed: u64,
    pub oracle: OracleMode,
    pub report_dir: Option<PathBuf>,
    pub threshold_epochs: u64,
    pub skip_readiness: bool,
    pub timeout_ms: Option<u64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub report_json: String,
    pub report_markdown: String,
    pub roundlog: RoundLog,
    pub readiness: ReadinessReport,
    pub exit_code: i32,
    pub report_paths: Vec<PathBuf>,
}

/// The full pipeline: annotate, gate, extract facts, generate, dispatch,
/// filter, report. Exit code 0 means no genuine findings, 2 means genuine
/// findings; configuration failures surface as errors (exit 1).
pub fn cmd_run(settings: &RunSettings) -> Result<RunOutcome, PipelineError> {
    let oracle = settings.oracle.build()?;
    cmd_run_with_oracle(settings, oracle.as_ref())
}

/// Variant of [`cmd_run`] for callers that construct their own oracle.
pub fn cmd_run_with_oracle(
    settings: &RunSettings,
    oracle: &dyn EquivalenceOracle,
) -> Result<RunOutcome, PipelineError> {
    let rt = runtime();
    let spec = load_spec(&settings.spec_path, settings.sidecar_path.as_deref())?;
    let fleet = acquire_fleet(&rt, &settings.fleet, settings.timeout_ms)?;

    let readiness = rt.block_on(check_readiness(&fleet.endpoints, settings.threshold_epochs));
    if !settings.skip_readiness && !readiness.ready {
        return Err(PipelineError::Harness(HarnessError::NotReady(readiness)));
    }

    let mut warnings = Vec::new();
    let facts = if settings.mix.semantic > 0 {
        let rules = load_rules(settings.rules_path.as_deref())?;
        match rt.block_on(extract_facts(&rules, &fleet.endpoints[0], Some(&spec))) {
            Ok((store, extraction)) => {
                for (param_type, reason) in &extraction.failed {
                    warnings.push(format!("fact rule {param_type}: {reason}"));
                }
                Some(store)
            }
            Err(err) => {
                warnings.push(format!("fact extraction failed: {err}"));
                None
            }
        }
    } else {
        None
    };

    let batch = gen_batch(&spec, settings.mix, settings.seed, facts.as_ref())?;
    warnings.extend(batch.warnings.iter().cloned());

    let options = RoundOptions {
        threshold_epochs: settings.threshold_epochs,
        skip_readiness: true, // gated above, with the report kept
        timeout_override_ms: settings.timeout_ms,
    };
    let round = rt.block_on(run_round(&fleet.endpoints, &batch.requests, &options))?;

    let findings = filter_round(&round, &spec, &readiness, oracle);
    let report = build_report(&ReportInputs {
        spec: &spec,
        requests: &batch.requests,
        findings: &findings,
        round: &round,
        labels: &fleet.labels,
        fleet: &fleet.endpoints,
        warnings: &warnings,
        seed: settings.seed,
        mix: settings.mix,
    });

    let report_json = report.to_json_string();
    let report_markdown = render_markdown(&report);
    let mut report_paths = Vec::new();
    if let Some(dir) = &settings.report_dir {
        let json_path = dir.join("report.json");
        let md_path = dir.join("report.md");
        let log_path = dir.join("roundlog.jsonl");
        write_file(&json_path, &report_json)?;
        write_file(&md_path, &report_markdown)?;
        write_file(&log_path, &round.to_jsonl())?;
        report_paths.extend([json_path, md_path, log_path]);
    }

    let exit_code = if report.has_genuine_findings() { 2 } else { 0 };
    Ok(RunOutcome {
        report,
        report_json,
        report_markdown,
        roundlog: round,
        readiness,
        exit_code,
        report_paths,
    })
}

/// Diff + classify every entry of a round.
pub fn filter_round(
    round: &RoundLog,
    spec: &ApiSpec,
    readiness: &ReadinessReport,
    oracle: &dyn EquivalenceOracle,
) -> Vec<Finding> {
    let mut findings = Vec::new();
    for entry in &round.entries {
        let divergences = diff_records(&entry.records, spec, &entry.request.method);
        if divergences.is_empty() {
            continue;
        }
        let ctx =
            ClassifyContext { spec, method: &entry.request.method, readiness: Some(readiness) };
        let verdicts = classify_all(&divergences, &ctx, oracle);
        findings.push(Finding::new(entry.request.clone(), divergences, verdicts));
    }
    findings
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub report: RunReport,
    pub replay_diffs: Vec<String>,
    pub exit_code: i32,
}

/// Re-dispatches a logged round against a fleet and re-runs the filter.
/// Byte differences against the logged records are reported as warnings.
pub fn cmd_replay(
    roundlog_path: &Path,
    fleet_source: &FleetSource,
    spec_path: &Path,
    sidecar_path: Option<&Path>,
    oracle_mode: &OracleMode,
    skip_readiness: bool,
    report_dir: Option<&Path>,
) -> Result<ReplayOutcome, PipelineError> {
    let rt = runtime();
    let spec = load_spec(spec_path, sidecar_path)?;
    let logged = RoundLog::from_jsonl(&read_file(roundlog_path)?)?;
    let fleet = acquire_fleet(&rt, fleet_source, None)?;

    if let Some(first) = logged.entries.first() {
        if first.records.len() != fleet.endpoints.len() {
            return Err(PipelineError::FleetMismatch {
                expected: first.records.len(),
                actual: fleet.endpoints.len(),
            });
        }
    }

    let readiness = rt.block_on(check_readiness(&fleet.endpoints, 0));
    if !skip_readiness && !readiness.ready {
        return Err(PipelineError::Harness(HarnessError::NotReady(readiness)));
    }

    let requests: Vec<TestRequest> =
        logged.entries.iter().map(|entry| entry.request.clone()).collect();
    let options =
        RoundOptions { threshold_epochs: 0, skip_readiness: true, timeout_override_ms: None };
    let round = rt.block_on(run_round(&fleet.endpoints, &requests, &options))?;

    let mut replay_diffs = Vec::new();
    for (old, new) in logged.entries.iter().zip(&round.entries) {
        let old_bodies: BTreeMap<u32, &[u8]> =
            old.records.iter().map(|r| (r.endpoint_id, r.raw_body.as_slice())).collect();
        for record in &new.records {
            if old_bodies.get(&record.endpoint_id).copied() != Some(record.raw_body.as_slice()) {
                replay_diffs.push(format!(
                    "request {} endpoint {}: response bytes differ from the logged round",
                    new.request.request_id, record.endpoint_id
                ));
            }
        }
    }

    let oracle = oracle_mode.build()?;
    let findings = filter_round(&round, &spec, &readiness, oracle.as_ref());
    let mut warnings = replay_diffs.clone();
    if logged.entries.is_empty() {
        warnings.push("round log is empty; nothing replayed".to_string());
    }
    let report = build_report(&ReportInputs {
        spec: &spec,
        requests: &requests,
        findings: &findings,
        round: &round,
        labels: &fleet.labels,
        fleet: &fleet.endpoints,
        warnings: &warnings,
        seed: 0,
        mix: TestMix { invalid: 0, valid: 0, semantic: 0 },
    });
    if let Some(dir) = report_dir {
        write_file(&dir.join("replay-report.json"), &report.to_json_string())?;
        write_file(&dir.join("replay-report.md"), &render_markdown(&report))?;
    }
    let exit_code = if report.has_genuine_findings() { 2 } else { 0 };
    Ok(ReplayOutcome { report, replay_diffs, exit_code })
}
