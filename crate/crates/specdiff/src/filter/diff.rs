//! N-way structural comparison of response records.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::harness::ResponseRecord;
use crate::spec::{ApiSpec, ConsistencyPolicy, Transport};

use super::{Divergence, DivergenceKind, Observed};

/// Compares the records of one request and returns every divergent field
/// path. Object keys are compared as sets, arrays index-wise (or as
/// multisets where annotated), status codes at "/$status", transport
/// failures as availability at "/". Each divergence carries the policy of
/// its schema node, defaulting to must-identical.
pub fn diff_records(
    records: &[ResponseRecord],
    spec: &ApiSpec,
    method: &str,
) -> Vec<Divergence> {
    if records.len() < 2 {
        return Vec::new();
    }
    let mut divergences = Vec::new();

    // Availability tier: mixed response/no-response (or differing failure
    // kinds) is itself a divergence; uniform failure is not.
    let markers: Vec<Observed> = records
        .iter()
        .map(|record| match record.transport_error {
            Some(err) if record.is_unavailable() => {
                Observed::Unavailable(format!("{err:?}").to_ascii_lowercase())
            }
            _ => Observed::Present(Value::String("responded".to_string())),
        })
        .collect();
    if distinct_count(&markers) >= 2 {
        divergences.push(Divergence {
            field_path: "/".to_string(),
            kind: DivergenceKind::Availability,
            per_endpoint_values: records
                .iter()
                .zip(markers.iter())
                .map(|(record, marker)| (record.endpoint_id, marker.clone()))
                .collect(),
            policy: ConsistencyPolicy::MustIdentical,
            environmental: false,
        });
    }

    let responded: Vec<&ResponseRecord> =
        records.iter().filter(|record| !record.is_unavailable()).collect();
    if responded.len() < 2 {
        return divergences;
    }

    // Status tier.
    let statuses: Vec<Option<u16>> = responded.iter().map(|record| record.http_status).collect();
    if statuses.windows(2).any(|pair| pair[0] != pair[1]) {
        divergences.push(Divergence {
            field_path: "/$status".to_string(),
            kind: DivergenceKind::StatusMismatch,
            per_endpoint_values: responded
                .iter()
                .map(|record| {
                    (
                        record.endpoint_id,
                        Observed::Present(Value::from(record.http_status.unwrap_or(0))),
                    )
                })
                .collect(),
            policy: ConsistencyPolicy::MustIdentical,
            environmental: false,
        });
    }

    // Parseability tier: JSON vs non-JSON bodies.
    let parse_markers: Vec<Observed> = responded
        .iter()
        .map(|record| match &record.body {
            Some(_) => Observed::Present(Value::String("json".to_string())),
            None => Observed::Unparseable,
        })
        .collect();
    if distinct_count(&parse_markers) >= 2 {
        divergences.push(Divergence {
            field_path: "/".to_string(),
            kind: DivergenceKind::TypeMismatch,
            per_endpoint_values: responded
                .iter()
                .map(|record| {
                    let observed = match &record.body {
                        Some(body) => Observed::Present(body.clone()),
                        None => Observed::Unparseable,
                    };
                    (record.endpoint_id, observed)
                })
                .collect(),
            policy: ConsistencyPolicy::MustIdentical,
            environmental: false,
        });
    }

    // Body tier: recursive structural diff over the parsed bodies.
    let parsed: Vec<(u32, &Value)> = responded
        .iter()
        .filter_map(|record| record.body.as_ref().map(|body| (record.endpoint_id, body)))
        .collect();
    if parsed.len() >= 2 {
        let present: Vec<(u32, Option<&Value>)> =
            parsed.iter().map(|(id, body)| (*id, Some(*body))).collect();
        walk("", &present, spec, method, &mut divergences);
    }

    divergences
}

fn distinct_count(observed: &[Observed]) -> usize {
    let mut seen: Vec<&Observed> = Vec::new();
    for o in observed {
        if !seen.contains(&o) {
            seen.push(o);
        }
    }
    seen.len()
}

fn attach_policy(
    spec: &ApiSpec,
    method: &str,
    path: &str,
    kind: DivergenceKind,
    per_endpoint_values: BTreeMap<u32, Observed>,
) -> Divergence {
    let decision = spec.policy_at(method, path);
    Divergence {
        field_path: if path.is_empty() { "/".to_string() } else { path.to_string() },
        kind,
        per_endpoint_values,
        policy: decision.policy,
        environmental: decision.environmental,
    }
}

/// True when the path names a node of the declared result schema; used to
/// tell missing fields (declared, absent somewhere) from extra fields
/// (undeclared, present somewhere).
fn declared_in_schema(spec: &ApiSpec, method: &str, path: &str) -> bool {
    let Some(method_spec) = spec.method(method) else { return false };
    let schema_path = match method_spec.transport {
        Transport::JsonrpcPost => {
            let trimmed = path.trim_start_matches('/');
            match trimmed.strip_prefix("result") {
                Some(rest) => rest.to_string(),
                None => return false,
            }
        }
        _ => path.to_string(),
    };
    method_spec.result.resolve_path(&schema_path).is_some()
}

fn walk(
    path: &str,
    values: &[(u32, Option<&Value>)],
    spec: &ApiSpec,
    method: &str,
    out: &mut Vec<Divergence>,
) {
    let present: Vec<(u32, &Value)> =
        values.iter().filter_map(|(id, v)| v.map(|v| (*id, v))).collect();
    if present.is_empty() {
        return;
    }

    // Presence tier at this path.
    if present.len() < values.len() {
        let kind = if declared_in_schema(spec, method, path) {
            DivergenceKind::MissingField
        } else {
            DivergenceKind::ExtraField
        };
        let per_endpoint = values
            .iter()
            .map(|(id, v)| {
                (*id, v.map(|v| Observed::Present(v.clone())).unwrap_or(Observed::Absent))
            })
            .collect();
        out.push(attach_policy(spec, method, path, kind, per_endpoint));
    }
    if present.len() < 2 {
        return;
    }
    if present.windows(2).all(|pair| pair[0].1 == pair[1].1) {
        return;
    }

    let all_objects = present.iter().all(|(_, v)| v.is_object());
    let all_arrays = present.iter().all(|(_, v)| v.is_array());

    if all_objects {
        let mut keys: Vec<String> = Vec::new();
        for (_, value) in &present {
            for key in value.as_object().expect("checked object").keys() {
                if !keys.contains(key) {
                    keys.push(key.clone());
                }
            }
        }
        keys.sort();
        for key in keys {
            let child: Vec<(u32, Option<&Value>)> =
                present.iter().map(|(id, v)| (*id, v.get(&key))).collect();
            walk(&format!("{path}/{key}"), &child, spec, method, out);
        }
        return;
    }

    if all_arrays {
        if spec.unordered_at(method, path) {
            if !multisets_equal(&present) {
                let per_endpoint = present
                    .iter()
                    .map(|(id, v)| (*id, Observed::Present((*v).clone())))
                    .collect();
                out.push(attach_policy(
                    spec,
                    method,
                    path,
                    DivergenceKind::ValueMismatch,
                    per_endpoint,
                ));
            }
            return;
        }
        let max_len = present
            .iter()
            .map(|(_, v)| v.as_array().expect("checked array").len())
            .max()
            .unwrap_or(0);
        for index in 0..max_len {
            let child: Vec<(u32, Option<&Value>)> = present
                .iter()
                .map(|(id, v)| (*id, v.as_array().expect("checked array").get(index)))
                .collect();
            walk(&format!("{path}/{index}"), &child, spec, method, out);
        }
        return;
    }

    // Scalars, or mixed shapes.
    let same_type = present
        .windows(2)
        .all(|pair| json_type(pair[0].1) == json_type(pair[1].1));
    let kind =
        if same_type { DivergenceKind::ValueMismatch } else { DivergenceKind::TypeMismatch };
    let per_endpoint =
        present.iter().map(|(id, v)| (*id, Observed::Present((*v).clone()))).collect();
    out.push(attach_policy(spec, method, path, kind, per_endpoint));
}

fn multisets_equal(present: &[(u32, &Value)]) -> bool {
    let canonical: Vec<Vec<String>> = present
        .iter()
        .map(|(_, v)| {
            let mut items: Vec<String> = v
                .as_array()
                .expect("checked array")
                .iter()
                .map(|item| serde_json::to_string(item).expect("item serializes"))
                .collect();
            items.sort();
            items
        })
        .collect();
    canonical.windows(2).all(|pair| pair[0] == pair[1])
}

fn json_type(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn record(endpoint_id: u32, body: Value) -> ResponseRecord {
        ResponseRecord {
            endpoint_id,
            request_id: 1,
            http_status: Some(200),
            raw_body: serde_json::to_vec(&body).unwrap(),
            body: Some(body),
            transport_error: None,
            latency_ms: 1,
        }
    }

    fn balance_spec() -> ApiSpec {
        crate::spec::parse_spec(
            r#"{"methods": [
              { "name": "eth_getBalance", "transport": "jsonrpc_post", "params": [],
                "result": {"type": "object", "properties": {
                  "balance": {"type": "string"}}} }
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn identical_bodies_produce_no_divergence() {
        let spec = balance_spec();
        let records =
            vec![record(0, json!({"result": {"balance": "0x1"}})), record(1, json!({"result": {"balance": "0x1"}}))];
        assert!(diff_records(&records, &spec, "eth_getBalance").is_empty());
    }

    #[test]
    fn value_mismatch_is_located() {
        let spec = balance_spec();
        let records = vec![
            record(0, json!({"result": {"balance": "0x1"}})),
            record(1, json!({"result": {"balance": "0x2"}})),
        ];
        let divs = diff_records(&records, &spec, "eth_getBalance");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].field_path, "/result/balance");
        assert_eq!(divs[0].kind, DivergenceKind::ValueMismatch);
        assert_eq!(divs[0].policy, ConsistencyPolicy::MustIdentical);
    }

    #[test]
    fn missing_declared_key_is_missing_field() {
        let spec = balance_spec();
        let records = vec![
            record(0, json!({"result": {"balance": "0x1"}})),
            record(1, json!({"result": {}})),
        ];
        let divs = diff_records(&records, &spec, "eth_getBalance");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].kind, DivergenceKind::MissingField);
        assert_eq!(divs[0].per_endpoint_values[&1], Observed::Absent);
    }

    #[test]
    fn undeclared_key_is_extra_field() {
        let spec = balance_spec();
        let records = vec![
            record(0, json!({"result": {"balance": "0x1", "debug": 1}})),
            record(1, json!({"result": {"balance": "0x1"}})),
        ];
        let divs = diff_records(&records, &spec, "eth_getBalance");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].field_path, "/result/debug");
        assert_eq!(divs[0].kind, DivergenceKind::ExtraField);
    }

    #[test]
    fn status_differences_surface_at_the_synthetic_path() {
        let spec = balance_spec();
        let mut bad = record(1, json!({"result": {"balance": "0x1"}}));
        bad.http_status = Some(500);
        let records = vec![record(0, json!({"result": {"balance": "0x1"}})), bad];
        let divs = diff_records(&records, &spec, "eth_getBalance");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].field_path, "/$status");
        assert_eq!(divs[0].kind, DivergenceKind::StatusMismatch);
    }

    #[test]
    fn transport_failure_is_availability_at_root() {
        let spec = balance_spec();
        let dead = ResponseRecord {
            endpoint_id: 1,
            request_id: 1,
            http_status: None,
            body: None,
            raw_body: Vec::new(),
            transport_error: Some(crate::harness::TransportErrorKind::Timeout),
            latency_ms: 1000,
        };
        let records = vec![
            record(0, json!({"result": {"balance": "0x1"}})),
            dead,
            record(2, json!({"result": {"balance": "0x1"}})),
        ];
        let divs = diff_records(&records, &spec, "eth_getBalance");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].kind, DivergenceKind::Availability);
        assert_eq!(divs[0].field_path, "/");
    }

    #[test]
    fn type_mismatch_at_leaf() {
        let spec = balance_spec();
        let records = vec![
            record(0, json!({"result": {"balance": "0x1"}})),
            record(1, json!({"result": {"balance": 1}})),
        ];
        let divs = diff_records(&records, &spec, "eth_getBalance");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].kind, DivergenceKind::TypeMismatch);
    }

    #[test]
    fn unordered_arrays_compare_as_multisets() {
        let spec = crate::spec::parse_spec(
            r#"{"methods": [
              { "name": "m", "transport": "jsonrpc_post", "params": [],
                "result": {"type": "object", "properties": {
                  "peers": {"type": "array", "x-unordered": true,
                            "items": {"type": "string"}}}} }
            ]}"#,
        )
        .unwrap();
        let records = vec![
            record(0, json!({"result": {"peers": ["a", "b", "c"]}})),
            record(1, json!({"result": {"peers": ["c", "a", "b"]}})),
        ];
        assert!(diff_records(&records, &spec, "m").is_empty(), "permutation is not a divergence");

        let records = vec![
            record(0, json!({"result": {"peers": ["a", "b"]}})),
            record(1, json!({"result": {"peers": ["a", "x"]}})),
        ];
        let divs = diff_records(&records, &spec, "m");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].field_path, "/result/peers");
        assert_eq!(divs[0].kind, DivergenceKind::ValueMismatch);
    }

    #[test]
    fn array_elements_compare_index_wise() {
        let spec = balance_spec();
        let records = vec![
            record(0, json!({"result": {"balance": "0x1", "txs": ["a", "b"]}})),
            record(1, json!({"result": {"balance": "0x1", "txs": ["a", "c"]}})),
        ];
        let divs = diff_records(&records, &spec, "eth_getBalance");
        assert_eq!(divs.len(), 1);
        assert_eq!(divs[0].field_path, "/result/txs/1");
    }
}
