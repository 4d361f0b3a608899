//! Live-state fact extraction and semantic enrichment of requests.
//!
//! Fact rules are data: each rule names a parameter type, the API that can
//! source values for it, and the path to extract from the response. The
//! resulting fact store turns syntactically valid requests into requests
//! that reference entities which actually exist on the chain under test.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gen::request::JSONRPC_VERSION;
use crate::gen::{TestRequest, Validity};
use crate::harness::http::{send_wire, RawResponse, WireRequest};
use crate::harness::{Endpoint, Layer};
use crate::spec::{validate_value, ApiSpec, MethodSpec, Transport};

#[derive(Debug, thiserror::Error)]
pub enum FactError {
    #[error("all {0} fact rules failed; no facts extracted")]
    AllRulesFailed(usize),
    #[error("missing anchor for param type {param_type}: {detail}")]
    MissingAnchor { param_type: String, detail: String },
    #[error("fact rule for {param_type} is unresolvable: {detail}")]
    BadRule { param_type: String, detail: String },
}

/// One row of the fact-rule table: where values for a parameter type come
/// from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactRule {
    pub param_type: String,
    pub layer: Layer,
    pub source_method: String,
    /// Positional params for the source call. String entries may hold
    /// placeholders like "{block_number.hex}" that are resolved from facts
    /// extracted by earlier rules.
    #[serde(default)]
    pub source_params: Vec<Value>,
    /// JSON-pointer-like path into the source response; a `*` segment maps
    /// over all elements of an array.
    pub extraction_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_transform: Option<String>,
    /// Wire details for sources not present in the active spec.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport: Option<Transport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_template: Option<String>,
}

/// Cache of live chain entities, keyed by parameter type. Immutable during
/// a test round.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FactStore {
    pub facts: BTreeMap<String, Vec<Value>>,
    pub captured_at_ms: BTreeMap<String, u64>,
    pub current_slot: Option<u64>,
    pub current_block: Option<u64>,
}

impl FactStore {
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn values(&self, param_type: &str) -> Option<&Vec<Value>> {
        self.facts.get(param_type)
    }

    /// Inserts extracted values, deduplicated, and refreshes anchors.
    pub fn insert(&mut self, param_type: &str, values: Vec<Value>) {
        let mut deduped: Vec<Value> = Vec::new();
        for value in values {
            if !value.is_null() && !deduped.contains(&value) {
                deduped.push(value);
            }
        }
        if deduped.is_empty() {
            return;
        }
        let ints: Vec<u64> = deduped.iter().filter_map(Value::as_u64).collect();
        if let Some(max) = ints.iter().max() {
            if slot_typed(param_type) {
                self.current_slot = Some(self.current_slot.unwrap_or(0).max(*max));
            }
            if param_type == "block_number" {
                self.current_block = Some(self.current_block.unwrap_or(0).max(*max));
            }
        }
        self.captured_at_ms.insert(param_type.to_string(), now_ms());
        self.facts
            .entry(param_type.to_string())
            .and_modify(|existing| {
                for value in &deduped {
                    if !existing.contains(value) {
                        existing.push(value.clone());
                    }
                }
            })
            .or_insert(deduped);
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn slot_typed(param_type: &str) -> bool {
    matches!(param_type, "slot" | "state_id.slot" | "block_id.slot")
}

fn range_typed(param_type: &str) -> bool {
    slot_typed(param_type) || matches!(param_type, "epoch" | "block_number")
}

/// Per-rule outcome of one extraction pass.
#[derive(Debug, Clone, Serialize)]
pub struct ExtractionReport {
    pub succeeded: Vec<String>,
    pub failed: Vec<(String, String)>,
}

/// Pulls facts from a single reference endpoint by replaying each rule's
/// source call. Individual rule failures are recorded, not fatal; only a
/// fully failed extraction is an error.
pub async fn extract_facts(
    rules: &[FactRule],
    endpoint: &Endpoint,
    spec: Option<&ApiSpec>,
) -> Result<(FactStore, ExtractionReport), FactError> {
    let mut store = FactStore::default();
    let mut report = ExtractionReport { succeeded: Vec::new(), failed: Vec::new() };
    if rules.is_empty() {
        return Ok((store, report));
    }
    let client = reqwest::Client::new();

    for rule in rules {
        match extract_one(rule, endpoint, spec, &store, &client).await {
            Ok(values) if !values.is_empty() => {
                store.insert(&rule.param_type, values);
                report.succeeded.push(rule.param_type.clone());
            }
            Ok(_) => {
                report
                    .failed
                    .push((rule.param_type.clone(), "no values at extraction path".to_string()));
            }
            Err(reason) => report.failed.push((rule.param_type.clone(), reason)),
        }
    }

    // A CL fact without a slot anchor would break downstream mutation.
    if store.current_slot.is_none() {
        let cl_types: Vec<String> = rules
            .iter()
            .filter(|r| r.layer == Layer::Cl && store.facts.contains_key(&r.param_type))
            .map(|r| r.param_type.clone())
            .collect();
        for param_type in cl_types {
            store.facts.remove(&param_type);
            store.captured_at_ms.remove(&param_type);
            report.succeeded.retain(|t| t != &param_type);
            report.failed.push((param_type, "dropped: current slot unavailable".to_string()));
        }
    }

    if store.is_empty() && !report.failed.is_empty() {
        return Err(FactError::AllRulesFailed(rules.len()));
    }
    Ok((store, report))
}

async fn extract_one(
    rule: &FactRule,
    endpoint: &Endpoint,
    spec: Option<&ApiSpec>,
    store: &FactStore,
    client: &reqwest::Client,
) -> Result<Vec<Value>, String> {
    let (transport, path_template) = resolve_source(rule, spec)?;
    let params: Vec<Value> = rule
        .source_params
        .iter()
        .map(|p| resolve_placeholder(p, store))
        .collect::<Result<_, _>>()?;

    let wire = match transport {
        Transport::JsonrpcPost => {
            let body = serde_json::json!({
                "id": 1,
                "jsonrpc": JSONRPC_VERSION,
                "method": rule.source_method,
                "params": params,
            });
            WireRequest {
                http_method: "POST".to_string(),
                url: endpoint.base_url.clone(),
                body: Some(serde_json::to_vec(&body).expect("body serializes")),
            }
        }
        Transport::RestGet | Transport::RestPost => {
            let template =
                path_template.ok_or_else(|| "REST source without a path template".to_string())?;
            let mut path = String::new();
            let mut param_iter = params.iter();
            for segment in template.split('/').filter(|s| !s.is_empty()) {
                path.push('/');
                if segment.starts_with('{') {
                    let value = param_iter
                        .next()
                        .ok_or_else(|| "not enough source params for path".to_string())?;
                    path.push_str(&crate::gen::request::render_wire_scalar(value));
                } else {
                    path.push_str(segment);
                }
            }
            let body = if transport == Transport::RestPost {
                param_iter.next().map(|v| serde_json::to_vec(v).expect("body serializes"))
            } else {
                None
            };
            WireRequest {
                http_method: if transport == Transport::RestGet { "GET" } else { "POST" }
                    .to_string(),
                url: format!("{}{}", endpoint.base_url.trim_end_matches('/'), path),
                body,
            }
        }
    };

    let response: RawResponse = send_wire(client, &wire, endpoint.timeout_ms).await;
    let Some(status) = response.status else {
        return Err(format!("transport failure: {}", response.error.unwrap_or_default()));
    };
    if status >= 400 {
        return Err(format!("source call returned status {status}"));
    }
    let body: Value =
        serde_json::from_slice(&response.body).map_err(|e| format!("non-JSON response: {e}"))?;
    if body.get("error").map_or(false, |e| !e.is_null()) {
        return Err(format!("source call returned error: {}", body["error"]));
    }

    let raw = extract_path(&body, &rule.extraction_path);
    let transformed: Vec<Value> = raw
        .into_iter()
        .filter_map(|value| apply_transform(&value, rule.post_transform.as_deref()))
        .collect();
    Ok(transformed)
}

fn resolve_source(
    rule: &FactRule,
    spec: Option<&ApiSpec>,
) -> Result<(Transport, Option<String>), String> {
    if let Some(transport) = rule.transport {
        return Ok((transport, rule.path_template.clone()));
    }
    if let Some(method) = spec.and_then(|s| s.method(&rule.source_method)) {
        return Ok((method.transport, method.path_template.clone()));
    }
    Err(format!(
        "source method {} is neither declared external nor present in the spec",
        rule.source_method
    ))
}

/// Resolves "{param_type}" / "{param_type.hex}" / "{param_type.dec}"
/// placeholders against already-extracted facts.
fn resolve_placeholder(param: &Value, store: &FactStore) -> Result<Value, String> {
    let Some(text) = param.as_str() else { return Ok(param.clone()) };
    let Some(inner) = text.strip_prefix('{').and_then(|s| s.strip_suffix('}')) else {
        return Ok(param.clone());
    };
    let (param_type, render) = match inner.rsplit_once('.') {
        Some((t, r)) if matches!(r, "hex" | "dec" | "raw") => (t, r),
        _ => (inner, "raw"),
    };
    let values = store
        .values(param_type)
        .ok_or_else(|| format!("placeholder {{{inner}}} has no extracted facts yet"))?;
    let first = values.first().expect("stored lists are non-empty");
    match render {
        "hex" => {
            let n = first.as_u64().ok_or_else(|| format!("{{{inner}}} fact is not an integer"))?;
            Ok(Value::String(format!("0x{n:x}")))
        }
        "dec" => {
            let n = first.as_u64().ok_or_else(|| format!("{{{inner}}} fact is not an integer"))?;
            Ok(Value::String(n.to_string()))
        }
        _ => Ok(first.clone()),
    }
}

/// Walks a JSON-pointer-like path; a `*` segment fans out over arrays.
fn extract_path(body: &Value, path: &str) -> Vec<Value> {
    let mut current = vec![body.clone()];
    for segment in path.trim_start_matches('/').split('/').filter(|s| !s.is_empty()) {
        let mut next = Vec::new();
        for value in current {
            match segment {
                "*" => {
                    if let Some(items) = value.as_array() {
                        next.extend(items.iter().cloned());
                    }
                }
                _ => {
                    if let Some(child) = value.get(segment) {
                        next.push(child.clone());
                    } else if let (Ok(index), Some(items)) =
                        (segment.parse::<usize>(), value.as_array())
                    {
                        if let Some(child) = items.get(index) {
                            next.push(child.clone());
                        }
                    }
                }
            }
        }
        current = next;
    }
    current.into_iter().filter(|v| !v.is_null()).collect()
}

fn apply_transform(value: &Value, transform: Option<&str>) -> Option<Value> {
    match transform {
        None => Some(value.clone()),
        Some("hex_to_int") => {
            let text = value.as_str()?;
            let n = u64::from_str_radix(text.strip_prefix("0x")?, 16).ok()?;
            Some(Value::from(n))
        }
        Some("decimal_to_int") => match value {
            Value::Number(_) => Some(value.clone()),
            Value::String(s) => s.parse::<u64>().ok().map(Value::from),
            _ => None,
        },
        Some("slot_to_epoch") => {
            let slot = match value {
                Value::Number(n) => n.as_u64()?,
                Value::String(s) => s.parse::<u64>().ok()?,
                _ => return None,
            };
            Some(Value::from(slot / 32))
        }
        Some(_) => None,
    }
}

/// Produces one semantically plausible value for a parameter type. Ranged
/// types (slots, epochs, block numbers) are sampled uniformly from
/// `[1, current anchor]`; identifier types are drawn verbatim from the
/// store and never synthesized.
pub fn mutate_semantic<R: Rng>(
    param_type: &str,
    store: &FactStore,
    rng: &mut R,
) -> Result<Value, FactError> {
    if range_typed(param_type) {
        let anchor = if slot_typed(param_type) {
            store.current_slot
        } else if param_type == "epoch" {
            store
                .values("epoch")
                .and_then(|vals| vals.iter().filter_map(Value::as_u64).max())
                .or(store.current_slot.map(|s| s / 32))
        } else {
            store.current_block
        };
        let anchor = anchor.ok_or_else(|| FactError::MissingAnchor {
            param_type: param_type.to_string(),
            detail: "no current anchor captured".to_string(),
        })?;
        if anchor == 0 {
            return Err(FactError::MissingAnchor {
                param_type: param_type.to_string(),
                detail: "anchor is zero; range [1, anchor] is empty".to_string(),
            });
        }
        return Ok(Value::from(rng.gen_range(1..=anchor)));
    }
    let values = store.values(param_type).ok_or_else(|| FactError::MissingAnchor {
        param_type: param_type.to_string(),
        detail: "no stored facts".to_string(),
    })?;
    Ok(values.choose(rng).expect("stored lists are non-empty").clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnrichOutcome {
    Enriched,
    Degraded { reason: String },
}

/// Renders a mutated value into whichever shape the param schema accepts:
/// the raw value, a decimal string, or a minimal hex string.
fn fit_to_schema(value: &Value, schema: &crate::spec::SchemaNode) -> Option<Value> {
    if validate_value(schema, value) {
        return Some(value.clone());
    }
    if let Some(n) = value.as_u64() {
        let decimal = Value::String(n.to_string());
        if validate_value(schema, &decimal) {
            return Some(decimal);
        }
        let hex = Value::String(format!("0x{n:x}"));
        if validate_value(schema, &hex) {
            return Some(hex);
        }
    }
    None
}

/// Replaces bound params of a syntactically valid request with fact-derived
/// values, upgrading it to semantically valid. Requests with no usable
/// binding come back unchanged with a degrade notice.
pub fn enrich<R: Rng>(
    request: TestRequest,
    method: &MethodSpec,
    store: &FactStore,
    rng: &mut R,
) -> (TestRequest, EnrichOutcome) {
    if request.validity != Validity::SyntacticValid {
        return (
            request,
            EnrichOutcome::Degraded { reason: "request is not syntactic_valid".to_string() },
        );
    }
    let mut request = request;
    let mut replaced = Vec::new();

    for (index, param) in method.params.iter().enumerate() {
        let Some(param_type) = &param.semantic_type else { continue };
        let Ok(mutated) = mutate_semantic(param_type, store, rng) else { continue };
        let Some(fitted) = fit_to_schema(&mutated, &param.schema) else { continue };
        if apply_replacement(&mut request, method, index, &param.name, &fitted) {
            replaced.push(format!("semantic: {} <- {} fact", param.name, param_type));
        }
    }

    if replaced.is_empty() {
        let reason = if method.params.iter().all(|p| p.semantic_type.is_none()) {
            "no params carry a semantic-type binding".to_string()
        } else {
            "no facts available for any bound param".to_string()
        };
        return (request, EnrichOutcome::Degraded { reason });
    }
    request.validity = Validity::SemanticValid;
    request.provenance.extend(replaced);
    (request, EnrichOutcome::Enriched)
}

/// Surgically replaces one param value in the wire form.
fn apply_replacement(
    request: &mut TestRequest,
    method: &MethodSpec,
    declared_index: usize,
    name: &str,
    value: &Value,
) -> bool {
    match request.transport {
        Transport::JsonrpcPost => {
            let Some(params) = request.body.get_mut("params").and_then(Value::as_array_mut)
            else {
                return false;
            };
            match params.get_mut(declared_index) {
                Some(slot) => {
                    *slot = value.clone();
                    true
                }
                None => false,
            }
        }
        Transport::RestGet | Transport::RestPost => {
            let placeholders = method.path_placeholders();
            if placeholders.iter().any(|p| p == name) {
                return replace_path_segment(request, method, name, value);
            }
            match request.transport {
                Transport::RestGet => replace_query_param(request, name, value),
                Transport::RestPost => {
                    let (_, others) = {
                        let placeholder_set = method.path_placeholders();
                        let others: Vec<&str> = method
                            .params
                            .iter()
                            .filter(|p| !placeholder_set.contains(&p.name))
                            .map(|p| p.name.as_str())
                            .collect();
                        ((), others)
                    };
                    if others.len() == 1 && others[0] == name {
                        request.body = value.clone();
                        return true;
                    }
                    if let Some(obj) = request.body.as_object_mut() {
                        if obj.contains_key(name) {
                            obj.insert(name.to_string(), value.clone());
                            return true;
                        }
                    }
                    false
                }
                Transport::JsonrpcPost => unreachable!(),
            }
        }
    }
}

fn replace_path_segment(
    request: &mut TestRequest,
    method: &MethodSpec,
    name: &str,
    value: &Value,
) -> bool {
    let Some(path) = &request.path else { return false };
    let template = method.path_template.as_deref().unwrap_or("");
    let (path_part, query_part) = match path.split_once('?') {
        Some((p, q)) => (p.to_string(), Some(q.to_string())),
        None => (path.clone(), None),
    };
    let template_segments: Vec<&str> = template.split('/').filter(|s| !s.is_empty()).collect();
    let mut actual_segments: Vec<String> =
        path_part.split('/').filter(|s| !s.is_empty()).map(str::to_string).collect();
    if template_segments.len() != actual_segments.len() {
        return false;
    }
    let mut changed = false;
    for (index, tpl) in template_segments.iter().enumerate() {
        if tpl.strip_prefix('{').and_then(|s| s.strip_suffix('}')) == Some(name) {
            actual_segments[index] = crate::gen::request::render_wire_scalar(value);
            changed = true;
        }
    }
    if changed {
        let mut rebuilt = String::new();
        for segment in &actual_segments {
            rebuilt.push('/');
            rebuilt.push_str(segment);
        }
        if let Some(query) = query_part {
            rebuilt.push('?');
            rebuilt.push_str(&query);
        }
        request.path = Some(rebuilt);
    }
    changed
}

fn replace_query_param(request: &mut TestRequest, name: &str, value: &Value) -> bool {
    let Some(path) = &request.path else { return false };
    let Some((path_part, query_part)) = path.split_once('?') else { return false };
    let encoded_name = crate::gen::request::percent_encode(name);
    let mut changed = false;
    let rebuilt: Vec<String> = query_part
        .split('&')
        .map(|pair| {
            let key = pair.split_once('=').map(|(k, _)| k).unwrap_or(pair);
            if key == encoded_name {
                changed = true;
                format!("{key}={}", crate::gen::request::render_wire_scalar(value))
            } else {
                pair.to_string()
            }
        })
        .collect();
    if changed {
        request.path = Some(format!("{path_part}?{}", rebuilt.join("&")));
    }
    changed
}
