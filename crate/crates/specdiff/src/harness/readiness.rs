//! The readiness gate: all endpoints reachable, equal heads, enough
//! finalized epochs.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::{send_wire, WireRequest};
use super::{Endpoint, Layer};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointReadiness {
    pub endpoint_id: u32,
    pub label: String,
    pub reachable: bool,
    pub height: Option<u64>,
    /// Finality progress; meaningful for consensus-layer endpoints.
    pub finalized_epochs: Option<u64>,
    pub syncing: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReadinessReport {
    pub endpoints: Vec<EndpointReadiness>,
    pub ready: bool,
    pub failures: Vec<String>,
}

impl ReadinessReport {
    pub fn endpoint(&self, endpoint_id: u32) -> Option<&EndpointReadiness> {
        self.endpoints.iter().find(|e| e.endpoint_id == endpoint_id)
    }

    /// True when the endpoint reported itself as still syncing.
    pub fn is_syncing(&self, endpoint_id: u32) -> bool {
        self.endpoint(endpoint_id).and_then(|e| e.syncing).unwrap_or(false)
    }
}

/// Probes every endpoint and evaluates the gate: ready iff all endpoints
/// are reachable, all heads are equal, and every consensus-layer endpoint
/// has finalized at least `threshold_epochs`. Unreachability is a report
/// outcome, not an error.
pub async fn check_readiness(fleet: &[Endpoint], threshold_epochs: u64) -> ReadinessReport {
    let client = reqwest::Client::new();
    let probes = fleet.iter().map(|endpoint| probe(&client, endpoint));
    let endpoints: Vec<EndpointReadiness> = futures::future::join_all(probes).await;

    let mut failures = Vec::new();
    for state in &endpoints {
        if !state.reachable {
            failures.push(format!("endpoint {} ({}) unreachable", state.endpoint_id, state.label));
        }
    }
    let heights: Vec<u64> = endpoints.iter().filter_map(|e| e.height).collect();
    if heights.len() == endpoints.len() && !heights.is_empty() {
        let first = heights[0];
        if heights.iter().any(|h| *h != first) {
            failures.push(format!("height mismatch across endpoints: {heights:?}"));
        }
    } else if heights.len() != endpoints.len() {
        for state in &endpoints {
            if state.reachable && state.height.is_none() {
                failures.push(format!(
                    "endpoint {} ({}) reports no height",
                    state.endpoint_id, state.label
                ));
            }
        }
    }
    for (state, endpoint) in endpoints.iter().zip(fleet) {
        if endpoint.layer == Layer::Cl {
            match state.finalized_epochs {
                Some(epochs) if epochs >= threshold_epochs => {}
                Some(epochs) => failures.push(format!(
                    "endpoint {} ({}) finalized {epochs} epochs, need {threshold_epochs}",
                    state.endpoint_id, state.label
                )),
                None if threshold_epochs > 0 => failures.push(format!(
                    "endpoint {} ({}) reports no finality information",
                    state.endpoint_id, state.label
                )),
                None => {}
            }
        }
    }

    ReadinessReport { ready: failures.is_empty(), endpoints, failures }
}

async fn probe(client: &reqwest::Client, endpoint: &Endpoint) -> EndpointReadiness {
    let mut state = EndpointReadiness {
        endpoint_id: endpoint.endpoint_id,
        label: endpoint.label.clone(),
        reachable: false,
        height: None,
        finalized_epochs: None,
        syncing: None,
    };

    // Dedicated control endpoint first (the mock fleet always has one),
    // then the layer's standard queries.
    let control = WireRequest {
        http_method: "GET".to_string(),
        url: format!("{}/__control/status", endpoint.base_url.trim_end_matches('/')),
        body: None,
    };
    let response = send_wire(client, &control, endpoint.timeout_ms).await;
    if response.status == Some(200) {
        if let Ok(status) = serde_json::from_slice::<Value>(&response.body) {
            state.reachable = true;
            state.height = status.get("height").and_then(Value::as_u64);
            state.finalized_epochs = status.get("finalized_epochs").and_then(Value::as_u64);
            state.syncing = status.get("syncing").and_then(Value::as_bool);
            return state;
        }
    }

    match endpoint.layer {
        Layer::El => {
            let body = serde_json::json!({
                "id": 1, "jsonrpc": "2.0", "method": "eth_blockNumber", "params": []
            });
            let wire = WireRequest {
                http_method: "POST".to_string(),
                url: endpoint.base_url.trim_end_matches('/').to_string(),
                body: Some(serde_json::to_vec(&body).expect("body serializes")),
            };
            let response = send_wire(client, &wire, endpoint.timeout_ms).await;
            if response.status == Some(200) {
                if let Ok(parsed) = serde_json::from_slice::<Value>(&response.body) {
                    state.reachable = true;
                    state.height = parsed
                        .get("result")
                        .and_then(Value::as_str)
                        .and_then(|s| s.strip_prefix("0x"))
                        .and_then(|s| u64::from_str_radix(s, 16).ok());
                }
            }
        }
        Layer::Cl => {
            let wire = WireRequest {
                http_method: "GET".to_string(),
                url: format!("{}/eth/v1/node/syncing", endpoint.base_url.trim_end_matches('/')),
                body: None,
            };
            let response = send_wire(client, &wire, endpoint.timeout_ms).await;
            if response.status == Some(200) {
                if let Ok(parsed) = serde_json::from_slice::<Value>(&response.body) {
                    state.reachable = true;
                    let data = parsed.get("data").cloned().unwrap_or(Value::Null);
                    state.height = data
                        .get("head_slot")
                        .and_then(|v| v.as_str().and_then(|s| s.parse().ok()).or(v.as_u64()));
                    state.syncing = data.get("is_syncing").and_then(Value::as_bool);
                }
            }
        }
    }
    state
}
