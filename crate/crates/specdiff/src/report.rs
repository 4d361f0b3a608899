//! Run reports: deduplicated findings with replayable payloads, filter
//! counts, discovery-rate metrics, and suspected specification defects.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::filter::{compute_fdr, format_fdr, DivergenceKind, Finding, VerdictKind};
use crate::gen::{TestMix, TestRequest, Validity};
use crate::harness::{Endpoint, ResponseRecord, RoundLog, TransportErrorKind};
use crate::mock::{GroundTruth, PathLabel};
use crate::spec::{ApiSpec, ConsistencyPolicy, Transport};

/// Deterministic view of a record for embedding in reports: no latency, no
/// raw bytes (those live in the round log).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRecord {
    pub endpoint_id: u32,
    pub http_status: Option<u16>,
    pub transport_error: Option<TransportErrorKind>,
    pub body: Option<Value>,
}

impl From<&ResponseRecord> for ReportRecord {
    fn from(record: &ResponseRecord) -> Self {
        ReportRecord {
            endpoint_id: record.endpoint_id,
            http_status: record.http_status,
            transport_error: record.transport_error,
            body: record.body.clone(),
        }
    }
}

/// One deduplicated divergence group. Findings sharing method, field path,
/// kind and policy collapse into one entry with an occurrence count and a
/// replayable exemplar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FindingGroup {
    pub method: String,
    pub field_path: String,
    pub kind: DivergenceKind,
    pub policy: ConsistencyPolicy,
    pub verdict: VerdictKind,
    pub reason: String,
    pub oracle_used: bool,
    pub occurrences: u64,
    pub example_request: TestRequest,
    pub example_records: Vec<ReportRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FilteredCounts {
    pub environmental: u64,
    pub allowed: u64,
    pub semantic_equivalent: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub tp_with_filter: u64,
    pub fp_with_filter: u64,
    pub fdr_with_filter: Option<String>,
    pub tp_without_filter: u64,
    pub fp_without_filter: u64,
    pub fdr_without_filter: Option<String>,
    /// Divergence groups with no ground-truth label; counted as false
    /// positives above.
    pub unlabeled_groups: u64,
}

/// A spec-conformant request class uniformly rejected by every endpoint:
/// when all implementations agree the generated input is wrong, the
/// specification itself is the suspect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecDefectSuspect {
    pub method: String,
    pub messages: Vec<String>,
    pub rejected_requests: u64,
    pub example_request: TestRequest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRequestCount {
    pub method: String,
    pub invalid: u64,
    pub valid: u64,
    pub semantic: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// The only timestamp in the report.
    pub generated_at_ms: u64,
    pub tool_version: String,
    pub spec_label: String,
    pub seed: u64,
    pub mix: TestMix,
    pub fleet_labels: Vec<String>,
    pub request_counts: Vec<MethodRequestCount>,
    pub total_requests: u64,
    pub divergence_groups: u64,
    /// Genuine bugs only, deduplicated.
    pub findings: Vec<FindingGroup>,
    pub filtered: FilteredCounts,
    pub spec_defect_suspects: Vec<SpecDefectSuspect>,
    pub metrics: Option<MetricsBlock>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json_string(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn has_genuine_findings(&self) -> bool {
        !self.findings.is_empty()
    }
}

/// Rewrites the timestamp field so two reports can be compared bytewise.
pub fn normalize_timestamps(report_json: &str) -> String {
    let mut value: Value = match serde_json::from_str(report_json) {
        Ok(value) => value,
        Err(_) => return report_json.to_string(),
    };
    if let Some(obj) = value.as_object_mut() {
        obj.insert("generated_at_ms".to_string(), Value::from(0u64));
    }
    let mut out = serde_json::to_string_pretty(&value).expect("report re-serializes");
    out.push('\n');
    out
}

pub struct ReportInputs<'a> {
    pub spec: &'a ApiSpec,
    pub requests: &'a [TestRequest],
    pub findings: &'a [Finding],
    pub round: &'a RoundLog,
    pub labels: &'a [PathLabel],
    pub fleet: &'a [Endpoint],
    pub warnings: &'a [String],
    pub seed: u64,
    pub mix: TestMix,
}

pub fn build_report(inputs: &ReportInputs<'_>) -> RunReport {
    let mut groups: IndexMap<(String, String, DivergenceKind, ConsistencyPolicy), FindingGroup> =
        IndexMap::new();

    for finding in inputs.findings {
        let records: Vec<ReportRecord> = inputs
            .round
            .entries
            .iter()
            .find(|entry| entry.request.request_id == finding.request.request_id)
            .map(|entry| entry.records.iter().map(ReportRecord::from).collect())
            .unwrap_or_default();
        for (divergence, verdict) in finding.divergences.iter().zip(&finding.verdicts) {
            let key = (
                finding.request.method.clone(),
                divergence.field_path.clone(),
                divergence.kind,
                divergence.policy,
            );
            match groups.get_mut(&key) {
                Some(group) => {
                    group.occurrences += 1;
                    // A single genuine instance makes the whole group
                    // genuine; nothing is averaged away.
                    if verdict.value == VerdictKind::GenuineBug
                        && group.verdict != VerdictKind::GenuineBug
                    {
                        group.verdict = VerdictKind::GenuineBug;
                        group.reason = verdict.reason.clone();
                        group.oracle_used = verdict.oracle_used;
                        group.example_request = finding.request.clone();
                        group.example_records = records.clone();
                    }
                }
                None => {
                    groups.insert(
                        key,
                        FindingGroup {
                            method: finding.request.method.clone(),
                            field_path: divergence.field_path.clone(),
                            kind: divergence.kind,
                            policy: divergence.policy,
                            verdict: verdict.value,
                            reason: verdict.reason.clone(),
                            oracle_used: verdict.oracle_used,
                            occurrences: 1,
                            example_request: finding.request.clone(),
                            example_records: records.clone(),
                        },
                    );
                }
            }
        }
    }

    let mut filtered = FilteredCounts::default();
    let mut findings = Vec::new();
    for group in groups.values() {
        match group.verdict {
            VerdictKind::GenuineBug => findings.push(group.clone()),
            VerdictKind::FpEnvironmental => filtered.environmental += 1,
            VerdictKind::FpAllowed => filtered.allowed += 1,
            VerdictKind::FpSemanticEquivalent => filtered.semantic_equivalent += 1,
        }
    }

    let metrics = if inputs.labels.is_empty() {
        None
    } else {
        Some(compute_metrics(groups.values(), inputs.labels))
    };

    let mut request_counts: IndexMap<String, MethodRequestCount> = IndexMap::new();
    for request in inputs.requests {
        let entry = request_counts.entry(request.method.clone()).or_insert_with(|| {
            MethodRequestCount { method: request.method.clone(), invalid: 0, valid: 0, semantic: 0 }
        });
        match request.validity {
            Validity::SyntacticInvalid => entry.invalid += 1,
            Validity::SyntacticValid => entry.valid += 1,
            Validity::SemanticValid => entry.semantic += 1,
        }
    }

    RunReport {
        generated_at_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec_label: inputs.spec.source_label.clone(),
        seed: inputs.seed,
        mix: inputs.mix,
        fleet_labels: inputs.fleet.iter().map(|e| e.label.clone()).collect(),
        request_counts: request_counts.into_values().collect(),
        total_requests: inputs.requests.len() as u64,
        divergence_groups: groups.len() as u64,
        findings,
        filtered,
        spec_defect_suspects: detect_spec_defects(inputs.round, inputs.spec),
        metrics,
        warnings: inputs.warnings.to_vec(),
    }
}

fn compute_metrics<'a>(
    groups: impl Iterator<Item = &'a FindingGroup>,
    labels: &[PathLabel],
) -> MetricsBlock {
    let look_up = |method: &str, path: &str| {
        labels.iter().find(|l| l.method == method && l.path == path).map(|l| l.label)
    };
    let mut tp_with = 0u64;
    let mut fp_with = 0u64;
    let mut tp_without = 0u64;
    let mut fp_without = 0u64;
    let mut unlabeled = 0u64;

    for group in groups {
        let label = look_up(&group.method, &group.field_path);
        // Without the filter, every divergence group is a reported bug.
        match label {
            Some(GroundTruth::Genuine) => tp_without += 1,
            Some(GroundTruth::Fp) => fp_without += 1,
            None => {
                unlabeled += 1;
                fp_without += 1;
            }
        }
        if group.verdict == VerdictKind::GenuineBug {
            match label {
                Some(GroundTruth::Genuine) => tp_with += 1,
                _ => fp_with += 1,
            }
        }
    }

    MetricsBlock {
        tp_with_filter: tp_with,
        fp_with_filter: fp_with,
        fdr_with_filter: compute_fdr(tp_with, fp_with).ok().map(format_fdr),
        tp_without_filter: tp_without,
        fp_without_filter: fp_without,
        fdr_without_filter: compute_fdr(tp_without, fp_without).ok().map(format_fdr),
        unlabeled_groups: unlabeled,
    }
}

/// True when the record is an outright rejection (an error object for
/// JSON-RPC, an error status for REST). A null result is not a rejection.
fn rejected(record: &ResponseRecord, transport: Transport) -> bool {
    match transport {
        Transport::JsonrpcPost => record
            .body
            .as_ref()
            .map(|body| body.get("error").map_or(false, |e| !e.is_null()))
            .unwrap_or(false),
        _ => record.http_status.map_or(false, |status| status >= 400),
    }
}

fn rejection_message(record: &ResponseRecord, transport: Transport) -> Option<String> {
    let body = record.body.as_ref()?;
    let message = match transport {
        Transport::JsonrpcPost => body.pointer("/error/message")?,
        _ => body.get("message")?,
    };
    message.as_str().map(str::to_string)
}

/// Flags methods whose spec-conformant requests were rejected by every
/// endpoint, uniformly. When all independent implementations refuse inputs
/// generated straight from the specification, the specification is the
/// likely defect.
pub fn detect_spec_defects(round: &RoundLog, spec: &ApiSpec) -> Vec<SpecDefectSuspect> {
    let mut per_method: IndexMap<String, (u64, u64, Vec<String>, Option<TestRequest>)> =
        IndexMap::new();

    for entry in &round.entries {
        if entry.request.validity == Validity::SyntacticInvalid {
            continue;
        }
        let Some(method) = spec.method(&entry.request.method) else { continue };
        let responded: Vec<&ResponseRecord> =
            entry.records.iter().filter(|r| !r.is_unavailable()).collect();
        if responded.is_empty() {
            continue;
        }
        let all_rejected = responded.iter().all(|r| rejected(r, method.transport));
        let stats = per_method.entry(entry.request.method.clone()).or_insert((
            0,
            0,
            Vec::new(),
            None,
        ));
        stats.0 += 1;
        if all_rejected {
            stats.1 += 1;
            for record in &responded {
                if let Some(message) = rejection_message(record, method.transport) {
                    if !stats.2.contains(&message) {
                        stats.2.push(message);
                    }
                }
            }
            if stats.3.is_none() {
                stats.3 = Some(entry.request.clone());
            }
        }
    }

    per_method
        .into_iter()
        .filter(|(_, (total, rejected, _, _))| *total > 0 && total == rejected)
        .filter_map(|(method, (_, rejected, messages, example))| {
            example.map(|example_request| SpecDefectSuspect {
                method,
                messages,
                rejected_requests: rejected,
                example_request,
            })
        })
        .collect()
}

/// GitHub-issue-shaped summary.
pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Differential run report: {}\n\n", report.spec_label));
    out.push_str(&format!(
        "- seed: `{}`  mix: `{}`  requests: {}\n- fleet: {}\n- divergence groups: {} \
         (genuine: {}, environmental: {}, allowed: {}, semantically equivalent: {})\n\n",
        report.seed,
        report.mix,
        report.total_requests,
        report.fleet_labels.join(", "),
        report.divergence_groups,
        report.findings.len(),
        report.filtered.environmental,
        report.filtered.allowed,
        report.filtered.semantic_equivalent,
    ));

    if let Some(metrics) = &report.metrics {
        out.push_str("## Metrics (labeled scenario)\n\n");
        out.push_str(&format!(
            "| | TP | FP | FDR |\n|---|---|---|---|\n| with filter | {} | {} | {} |\n| without filter | {} | {} | {} |\n\n",
            metrics.tp_with_filter,
            metrics.fp_with_filter,
            metrics.fdr_with_filter.as_deref().unwrap_or("n/a"),
            metrics.tp_without_filter,
            metrics.fp_without_filter,
            metrics.fdr_without_filter.as_deref().unwrap_or("n/a"),
        ));
    }

    if !report.spec_defect_suspects.is_empty() {
        out.push_str("## Suspected specification defects\n\n");
        for suspect in &report.spec_defect_suspects {
            out.push_str(&format!(
                "- `{}`: every endpoint rejected all {} spec-conformant requests \
                 (uniform rejection). Messages: {}\n",
                suspect.method,
                suspect.rejected_requests,
                suspect.messages.iter().map(|m| format!("`{m}`")).collect::<Vec<_>>().join(", "),
            ));
        }
        out.push('\n');
    }

    for (index, finding) in report.findings.iter().enumerate() {
        out.push_str(&format!(
            "## Finding {}: `{}` diverges at `{}`\n\n",
            index + 1,
            finding.method,
            finding.field_path
        ));
        out.push_str(&format!(
            "- kind: {}\n- policy: {}\n- verdict reason: {}\n- occurrences: {}\n\n",
            finding.kind.as_str(),
            finding.policy.as_str(),
            finding.reason,
            finding.occurrences
        ));
        out.push_str("Reproduction request:\n\n```json\n");
        out.push_str(&serde_json::to_string_pretty(&finding.example_request).expect("serializes"));
        out.push_str("\n```\n\nPer-endpoint responses:\n\n");
        for record in &finding.example_records {
            let body = record
                .body
                .as_ref()
                .map(|b| serde_json::to_string(b).expect("serializes"))
                .unwrap_or_else(|| format!("<{:?}>", record.transport_error));
            out.push_str(&format!(
                "- endpoint {} (status {}): `{}`\n",
                record.endpoint_id,
                record.http_status.map(|s| s.to_string()).unwrap_or_else(|| "-".to_string()),
                body
            ));
        }
        out.push('\n');
    }

    if !report.warnings.is_empty() {
        out.push_str("## Warnings\n\n");
        for warning in &report.warnings {
            out.push_str(&format!("- {warning}\n"));
        }
    }
    out
}
