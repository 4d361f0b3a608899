//! Building single valid and invalid requests for one method.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::spec::{validate_value, MethodSpec, Transport};

use super::value::{gen_value_noted, random_any_value, random_string};
use super::{GenError, InvalidCategory, TestRequest, Validity};

pub const JSONRPC_VERSION: &str = "2.0";

/// Percent-encodes everything outside the unreserved set.
pub(crate) fn percent_encode(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for byte in text.as_bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(*byte as char)
            }
            other => out.push_str(&format!("%{other:02X}")),
        }
    }
    out
}

pub(crate) fn percent_decode(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() + 1 && i + 2 <= bytes.len() - 1 + 1 {
            if let (Some(hi), Some(lo)) = (
                bytes.get(i + 1).and_then(|b| (*b as char).to_digit(16)),
                bytes.get(i + 2).and_then(|b| (*b as char).to_digit(16)),
            ) {
                out.push((hi * 16 + lo) as u8);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Renders a JSON value as one URL path segment or query value.
pub(crate) fn render_wire_scalar(value: &Value) -> String {
    let raw = match value {
        Value::String(s) => s.clone(),
        other => serde_json::to_string(other).expect("value serializes"),
    };
    percent_encode(&raw)
}

fn jsonrpc_body(request_id: u64, method: &str, params: Vec<Value>) -> Value {
    json!({
        "id": request_id,
        "jsonrpc": JSONRPC_VERSION,
        "method": method,
        "params": params,
    })
}

/// Splits declared params into (path params, other params), preserving
/// declaration order.
fn split_params(method: &MethodSpec) -> (Vec<String>, Vec<String>) {
    let placeholders = method.path_placeholders();
    let mut path_params = Vec::new();
    let mut other = Vec::new();
    for param in &method.params {
        if placeholders.contains(&param.name) {
            path_params.push(param.name.clone());
        } else {
            other.push(param.name.clone());
        }
    }
    (path_params, other)
}

/// Assembles the wire form for a REST request from named values.
fn build_rest_wire(
    method: &MethodSpec,
    values: &[(String, Value)],
) -> (String, Value) {
    let template = method.path_template.as_deref().expect("REST method has a template");
    let lookup = |name: &str| values.iter().find(|(n, _)| n == name).map(|(_, v)| v);

    let mut path = String::new();
    for segment in template.split('/') {
        if segment.is_empty() {
            continue;
        }
        path.push('/');
        if let Some(name) = segment.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
            let value = lookup(name).cloned().unwrap_or(Value::Null);
            path.push_str(&render_wire_scalar(&value));
        } else {
            path.push_str(segment);
        }
    }
    if path.is_empty() {
        path.push('/');
    }

    let placeholders = method.path_placeholders();
    let rest: Vec<&(String, Value)> =
        values.iter().filter(|(name, _)| !placeholders.contains(name)).collect();

    match method.transport {
        Transport::RestGet => {
            if !rest.is_empty() {
                let query: Vec<String> = rest
                    .iter()
                    .map(|(name, value)| {
                        format!("{}={}", percent_encode(name), render_wire_scalar(value))
                    })
                    .collect();
                path.push('?');
                path.push_str(&query.join("&"));
            }
            (path, Value::Null)
        }
        Transport::RestPost => {
            let body = if rest.len() == 1 {
                // A single body param travels unwrapped, matching the
                // convention of REST APIs that post one document.
                rest[0].1.clone()
            } else {
                let mut obj = Map::new();
                for (name, value) in rest {
                    obj.insert(name.clone(), value.clone());
                }
                Value::Object(obj)
            };
            (path, body)
        }
        Transport::JsonrpcPost => unreachable!("REST wire builder called for JSON-RPC"),
    }
}

fn generate_param_values<R: Rng>(
    method: &MethodSpec,
    rng: &mut R,
    notes: &mut Vec<String>,
) -> Result<Vec<(String, Value)>, GenError> {
    let placeholders = method.path_placeholders();
    let mut values = Vec::new();
    for param in &method.params {
        let include = match method.transport {
            // Positional params cannot be skipped without shifting others.
            Transport::JsonrpcPost => true,
            _ => param.required || placeholders.contains(&param.name) || rng.gen_bool(0.5),
        };
        if include {
            let value =
                gen_value_noted(&param.schema, rng, &format!(" for param {}", param.name), notes)?;
            values.push((param.name.clone(), value));
        }
    }
    Ok(values)
}

fn assemble(
    method: &MethodSpec,
    request_id: u64,
    seed: u64,
    values: Vec<(String, Value)>,
    validity: Validity,
    fault_note: Option<String>,
    provenance: Vec<String>,
) -> TestRequest {
    let (path, body) = match method.transport {
        Transport::JsonrpcPost => {
            let params = values.into_iter().map(|(_, v)| v).collect();
            (None, jsonrpc_body(request_id, &method.name, params))
        }
        _ => {
            let (path, body) = build_rest_wire(method, &values);
            (Some(path), body)
        }
    };
    TestRequest {
        request_id,
        method: method.name.clone(),
        transport: method.transport,
        path,
        body,
        validity,
        fault_note,
        provenance,
        seed,
    }
}

/// Generates one syntactically valid request.
pub fn gen_valid_request<R: Rng>(
    method: &MethodSpec,
    rng: &mut R,
    request_id: u64,
    seed: u64,
) -> Result<TestRequest, GenError> {
    let mut notes = Vec::new();
    let values = generate_param_values(method, rng, &mut notes)?;
    Ok(assemble(method, request_id, seed, values, Validity::SyntacticValid, None, notes))
}

const VIOLATION_CANDIDATES: &[fn() -> Value] = &[
    || Value::Bool(true),
    || Value::from(10_000_000.0),
    || Value::String("zz-not-conforming".to_string()),
    || json!([[], 10_000_000.0, true, "0xfe97"]),
];

fn violation_for(method: &MethodSpec, name: &str) -> Option<Value> {
    let param = method.param(name)?;
    VIOLATION_CANDIDATES
        .iter()
        .map(|make| make())
        .find(|candidate| !validate_value(&param.schema, candidate))
}

/// Params eligible for each category.
fn removable_required(method: &MethodSpec) -> Vec<String> {
    let placeholders = method.path_placeholders();
    method
        .params
        .iter()
        .filter(|p| p.required && !placeholders.contains(&p.name))
        .map(|p| p.name.clone())
        .collect()
}

fn violable_params(method: &MethodSpec) -> Vec<String> {
    method
        .params
        .iter()
        .filter(|p| violation_for(method, &p.name).is_some())
        .map(|p| p.name.clone())
        .collect()
}

pub fn category_applicable(method: &MethodSpec, category: InvalidCategory) -> bool {
    match category {
        InvalidCategory::UndefinedField => true,
        InvalidCategory::MissingRequired => !removable_required(method).is_empty(),
        InvalidCategory::ConstraintViolation => !violable_params(method).is_empty(),
    }
}

/// Generates one syntactically invalid request of the given category. The
/// envelope (id, jsonrpc, method) stays intact; exactly one violation is
/// injected and named in the fault note.
pub fn gen_invalid_request<R: Rng>(
    method: &MethodSpec,
    category: InvalidCategory,
    rng: &mut R,
    request_id: u64,
    seed: u64,
) -> Result<TestRequest, GenError> {
    if !category_applicable(method, category) {
        return Err(GenError::InapplicableCategory {
            method: method.name.clone(),
            category: category.as_str().to_string(),
        });
    }
    let mut notes = Vec::new();
    let mut values = generate_param_values(method, rng, &mut notes)?;

    match category {
        InvalidCategory::UndefinedField => {
            let key = random_string(rng, 1, 8);
            let junk = random_any_value(rng, 1);
            match method.transport {
                Transport::JsonrpcPost => {
                    // Positional params have no field names; the undefined
                    // field rides inside an extra trailing object entry.
                    let extra = json!({ key.clone(): junk });
                    values.push((format!("$undefined:{key}"), extra));
                    let fault = format!("undefined field: injected extra param object key {key:?}");
                    Ok(assemble(method, request_id, seed, values, Validity::SyntacticInvalid, Some(fault), notes))
                }
                Transport::RestGet => {
                    values.push((format!("undefined_{}", random_string_ascii(rng)), junk));
                    let (name, _) = values.last().cloned().expect("just pushed");
                    let fault = format!("undefined field: injected query param {name:?}");
                    Ok(assemble(method, request_id, seed, values, Validity::SyntacticInvalid, Some(fault), notes))
                }
                Transport::RestPost => {
                    values.push((key.clone(), junk));
                    let fault = format!("undefined field: injected body key {key:?}");
                    Ok(assemble(method, request_id, seed, values, Validity::SyntacticInvalid, Some(fault), notes))
                }
            }
        }
        InvalidCategory::MissingRequired => {
            let candidates = removable_required(method);
            let target = candidates.choose(rng).expect("applicability checked").clone();
            values.retain(|(name, _)| name != &target);
            let fault = format!("missing required: {target}");
            Ok(assemble(method, request_id, seed, values, Validity::SyntacticInvalid, Some(fault), notes))
        }
        InvalidCategory::ConstraintViolation => {
            let candidates = violable_params(method);
            let target = candidates.choose(rng).expect("applicability checked").clone();
            let replacement = violation_for(method, &target).expect("eligibility checked");
            let kind_word = match &replacement {
                Value::Bool(_) => "boolean",
                Value::Number(_) => "number",
                Value::String(_) => "non-conforming string",
                Value::Array(_) => "array",
                _ => "value",
            };
            for (name, value) in &mut values {
                if name == &target {
                    *value = replacement.clone();
                }
            }
            let fault = format!("constraint violation: {target} replaced by {kind_word}");
            Ok(assemble(method, request_id, seed, values, Validity::SyntacticInvalid, Some(fault), notes))
        }
    }
}

fn random_string_ascii<R: Rng>(rng: &mut R) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..6).map(|_| *ALPHABET.choose(rng).expect("alphabet non-empty") as char).collect()
}

/// Independent request-level validity check: every declared param that is
/// present must satisfy its schema, required params must be present, and no
/// undeclared entries may appear. Used as the oracle for validity labels.
pub fn request_passes_validator(method: &MethodSpec, request: &TestRequest) -> bool {
    match method.transport {
        Transport::JsonrpcPost => {
            let Some(params) = request.jsonrpc_params() else { return false };
            if params.len() > method.params.len() {
                return false;
            }
            for (index, param) in method.params.iter().enumerate() {
                match params.get(index) {
                    Some(value) => {
                        if !validate_value(&param.schema, value) {
                            return false;
                        }
                    }
                    None => {
                        if param.required {
                            return false;
                        }
                    }
                }
            }
            true
        }
        Transport::RestGet | Transport::RestPost => rest_request_passes(method, request),
    }
}

fn rest_request_passes(method: &MethodSpec, request: &TestRequest) -> bool {
    let Some(path) = &request.path else { return false };
    let (path_part, query_part) = match path.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (path.as_str(), None),
    };

    // Path params: align actual segments against the template.
    let template = method.path_template.as_deref().unwrap_or("");
    let template_segments: Vec<&str> = template.split('/').filter(|s| !s.is_empty()).collect();
    let actual_segments: Vec<&str> = path_part.split('/').filter(|s| !s.is_empty()).collect();
    if template_segments.len() != actual_segments.len() {
        return false;
    }
    for (tpl, actual) in template_segments.iter().zip(&actual_segments) {
        if let Some(name) = tpl.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
            let Some(param) = method.param(name) else { return false };
            if !wire_value_validates(param, &percent_decode(actual)) {
                return false;
            }
        } else if tpl != actual {
            return false;
        }
    }

    let (_, other_params) = split_params(method);
    match method.transport {
        Transport::RestGet => {
            let mut seen = Vec::new();
            if let Some(query) = query_part {
                for pair in query.split('&').filter(|p| !p.is_empty()) {
                    let (key, value) = pair.split_once('=').unwrap_or((pair, ""));
                    let key = percent_decode(key);
                    let Some(param) = method.param(&key) else { return false };
                    if !wire_value_validates(param, &percent_decode(value)) {
                        return false;
                    }
                    seen.push(key);
                }
            }
            other_params
                .iter()
                .all(|name| !method.param(name).map_or(false, |p| p.required) || seen.contains(name))
        }
        Transport::RestPost => {
            if other_params.len() == 1 {
                let param = method.param(&other_params[0]).expect("declared");
                if param.required || !request.body.is_null() {
                    return validate_value(&param.schema, &request.body);
                }
                return true;
            }
            let Some(body) = request.body.as_object() else {
                return other_params.is_empty() && request.body.is_null();
            };
            for key in body.keys() {
                if method.param(key).is_none() {
                    return false;
                }
            }
            for name in &other_params {
                let param = method.param(name).expect("declared");
                match body.get(name) {
                    Some(value) => {
                        if !validate_value(&param.schema, value) {
                            return false;
                        }
                    }
                    None => {
                        if param.required {
                            return false;
                        }
                    }
                }
            }
            true
        }
        Transport::JsonrpcPost => unreachable!(),
    }
}

/// Validates a decoded path or query string against a param schema, trying
/// the raw string first and a JSON reading second.
fn wire_value_validates(param: &crate::spec::ParamSpec, decoded: &str) -> bool {
    if validate_value(&param.schema, &Value::String(decoded.to_string())) {
        return true;
    }
    match serde_json::from_str::<Value>(decoded) {
        Ok(value) => validate_value(&param.schema, &value),
        Err(_) => false,
    }
}
