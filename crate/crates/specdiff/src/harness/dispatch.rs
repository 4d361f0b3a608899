//! Fan-out dispatch and round orchestration.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::gen::TestRequest;

use super::http::{send_wire, wire_from_request};
use super::readiness::check_readiness;
use super::{Endpoint, HarnessError, Layer, ResponseRecord, TransportErrorKind};

/// Sends one request to every endpoint concurrently and collects one record
/// per endpoint, ordered by endpoint id regardless of arrival order. The
/// serialized body bytes are identical across endpoints. Transport failures
/// land in the record, never as errors.
pub async fn dispatch(request: &TestRequest, fleet: &[Endpoint]) -> Vec<ResponseRecord> {
    let client = reqwest::Client::new();
    dispatch_with_client(&client, request, fleet, None).await
}

pub(crate) async fn dispatch_with_client(
    client: &reqwest::Client,
    request: &TestRequest,
    fleet: &[Endpoint],
    timeout_override_ms: Option<u64>,
) -> Vec<ResponseRecord> {
    let body_bytes = if request.body.is_null() {
        Vec::new()
    } else {
        serde_json::to_vec(&request.body).expect("request body serializes")
    };

    let calls = fleet.iter().map(|endpoint| {
        let body_bytes = &body_bytes;
        let client = client.clone();
        async move {
            let wire = wire_from_request(request, &endpoint.base_url, body_bytes);
            let timeout = timeout_override_ms.unwrap_or(endpoint.timeout_ms);
            let started = Instant::now();
            let response = send_wire(&client, &wire, timeout).await;
            let latency_ms = started.elapsed().as_millis() as u64;

            match response.status {
                Some(status) => {
                    let parsed: Option<serde_json::Value> =
                        serde_json::from_slice(&response.body).ok();
                    let transport_error =
                        if parsed.is_none() { Some(TransportErrorKind::NonJson) } else { None };
                    ResponseRecord {
                        endpoint_id: endpoint.endpoint_id,
                        request_id: request.request_id,
                        http_status: Some(status),
                        body: parsed,
                        raw_body: response.body,
                        transport_error,
                        latency_ms,
                    }
                }
                None => ResponseRecord {
                    endpoint_id: endpoint.endpoint_id,
                    request_id: request.request_id,
                    http_status: None,
                    body: None,
                    raw_body: Vec::new(),
                    transport_error: Some(if response.timed_out {
                        TransportErrorKind::Timeout
                    } else {
                        TransportErrorKind::ConnectFailure
                    }),
                    latency_ms,
                },
            }
        }
    });

    let mut records = futures::future::join_all(calls).await;
    records.sort_by_key(|record| record.endpoint_id);
    records
}

/// One request with its per-endpoint records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundEntry {
    pub request: TestRequest,
    pub records: Vec<ResponseRecord>,
}

/// Everything observed in one test round; replayable on its own.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RoundLog {
    pub entries: Vec<RoundEntry>,
}

impl RoundLog {
    /// JSON Lines: one entry per line, raw bodies base64-encoded.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<RoundLog, HarnessError> {
        let mut entries = Vec::new();
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: RoundEntry = serde_json::from_str(line).map_err(|e| {
                HarnessError::MalformedLog { line: index + 1, message: e.to_string() }
            })?;
            entries.push(entry);
        }
        Ok(RoundLog { entries })
    }
}

#[derive(Debug, Clone)]
pub struct RoundOptions {
    pub threshold_epochs: u64,
    pub skip_readiness: bool,
    pub timeout_override_ms: Option<u64>,
}

impl Default for RoundOptions {
    fn default() -> Self {
        RoundOptions { threshold_epochs: 5, skip_readiness: false, timeout_override_ms: None }
    }
}

/// Runs a whole batch: readiness gate, then sequential dispatch of each
/// request to the endpoints of its layer. Requests run one after another so
/// deterministic fleets answer deterministically; fan-out across endpoints
/// within a request is concurrent.
pub async fn run_round(
    fleet: &[Endpoint],
    batch: &[TestRequest],
    options: &RoundOptions,
) -> Result<RoundLog, HarnessError> {
    if !options.skip_readiness {
        let report = check_readiness(fleet, options.threshold_epochs).await;
        if !report.ready {
            return Err(HarnessError::NotReady(report));
        }
    }

    // Layer mismatches are configuration errors, caught before any dispatch.
    let el_fleet: Vec<Endpoint> =
        fleet.iter().filter(|e| e.layer == Layer::El).cloned().collect();
    let cl_fleet: Vec<Endpoint> =
        fleet.iter().filter(|e| e.layer == Layer::Cl).cloned().collect();
    for request in batch {
        let layer = Layer::for_transport(request.transport);
        let sub = if layer == Layer::El { &el_fleet } else { &cl_fleet };
        if sub.is_empty() {
            return Err(HarnessError::NoEndpointsForLayer { layer, method: request.method.clone() });
        }
    }

    let client = reqwest::Client::new();
    let mut log = RoundLog::default();
    for request in batch {
        let sub = if Layer::for_transport(request.transport) == Layer::El {
            &el_fleet
        } else {
            &cl_fleet
        };
        let records =
            dispatch_with_client(&client, request, sub, options.timeout_override_ms).await;
        log.entries.push(RoundEntry { request: request.clone(), records });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundlog_jsonl_round_trips() {
        let entry = RoundEntry {
            request: TestRequest {
                request_id: 1,
                method: "eth_blockNumber".to_string(),
                transport: crate::spec::Transport::JsonrpcPost,
                path: None,
                body: serde_json::json!({"id":1,"jsonrpc":"2.0","method":"eth_blockNumber","params":[]}),
                validity: crate::gen::Validity::SyntacticValid,
                fault_note: None,
                provenance: vec![],
                seed: 0,
            },
            records: vec![ResponseRecord {
                endpoint_id: 0,
                request_id: 1,
                http_status: Some(200),
                body: Some(serde_json::json!({"result": "0x40"})),
                raw_body: b"{\"result\": \"0x40\"}".to_vec(),
                transport_error: None,
                latency_ms: 3,
            }],
        };
        let log = RoundLog { entries: vec![entry] };
        let text = log.to_jsonl();
        let parsed = RoundLog::from_jsonl(&text).unwrap();
        assert_eq!(parsed.entries.len(), 1);
        assert_eq!(parsed.entries[0].records[0].raw_body, b"{\"result\": \"0x40\"}");
    }

    #[test]
    fn malformed_log_lines_are_reported_with_line_numbers() {
        let err = RoundLog::from_jsonl("{}\n").unwrap_err();
        assert!(matches!(err, HarnessError::MalformedLog { line: 1, .. }));
    }
}
