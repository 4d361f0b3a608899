//! The in-process mock fleet: one HTTP server per node, all answering from
//! the same synthetic chain, each applying only its own injections.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::harness::{Endpoint, Layer};

use super::chain::SyntheticChain;
use super::inject::{apply_injections, DivergenceInjection};
use super::responses::{canonical_el, canonical_rest, RestOp};

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("port allocation failed: {0}")]
    PortAllocation(std::io::Error),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Ground-truth label for one expected divergence path, used to compute
/// discovery-rate metrics on synthetic scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    Genuine,
    Fp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathLabel {
    pub method: String,
    pub path: String,
    pub label: GroundTruth,
}

fn default_timeout() -> u64 {
    10_000
}

fn default_layer() -> Layer {
    Layer::El
}

/// A fleet description: chain seed, node count, per-node injections and
/// optional ground-truth labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleetScenario {
    pub chain_seed: u64,
    pub node_count: u32,
    #[serde(default = "default_layer")]
    pub layer: Layer,
    #[serde(default)]
    pub injections: Vec<DivergenceInjection>,
    #[serde(default)]
    pub labels: Vec<PathLabel>,
    #[serde(default = "default_timeout")]
    pub endpoint_timeout_ms: u64,
    /// Nodes whose control endpoint reports them as still syncing.
    #[serde(default)]
    pub syncing_nodes: Vec<u32>,
}

impl FleetScenario {
    pub fn from_json(text: &str) -> Result<Self, MockError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One request as seen by a mock node, for wire-fidelity assertions.
#[derive(Debug, Clone)]
pub struct CapturedRequest {
    pub endpoint_id: u32,
    pub method: String,
    pub path: Option<String>,
    pub body: Vec<u8>,
}

struct NodeState {
    endpoint_id: u32,
    label: String,
    chain: Arc<SyntheticChain>,
    injections: Vec<DivergenceInjection>,
    syncing: bool,
    captured: Arc<Mutex<Vec<CapturedRequest>>>,
}

/// Running fleet; shuts the servers down on drop.
pub struct FleetHandle {
    pub endpoints: Vec<Endpoint>,
    chain: Arc<SyntheticChain>,
    captured: Arc<Mutex<Vec<CapturedRequest>>>,
    tasks: Vec<tokio::task::JoinHandle<()>>,
}

impl FleetHandle {
    pub fn chain(&self) -> &SyntheticChain {
        &self.chain
    }

    pub fn captured(&self) -> Vec<CapturedRequest> {
        self.captured.lock().expect("capture lock").clone()
    }

    pub fn shutdown(&mut self) {
        for task in self.tasks.drain(..) {
            task.abort();
        }
    }
}

impl Drop for FleetHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Spawns the fleet on ephemeral localhost ports.
pub async fn spawn_fleet(scenario: &FleetScenario) -> Result<FleetHandle, MockError> {
    spawn_fleet_on_ports(scenario, None).await
}

/// Spawns on explicit ports (one per node); `None` picks free ports.
pub async fn spawn_fleet_on_ports(
    scenario: &FleetScenario,
    ports: Option<&[u16]>,
) -> Result<FleetHandle, MockError> {
    if scenario.node_count < 2 {
        return Err(MockError::InvalidScenario(
            "node_count must be at least 2 for differential use".to_string(),
        ));
    }
    if let Some(ports) = ports {
        if ports.len() != scenario.node_count as usize {
            return Err(MockError::InvalidScenario(format!(
                "{} ports supplied for {} nodes",
                ports.len(),
                scenario.node_count
            )));
        }
    }

    let chain = Arc::new(SyntheticChain::generate(scenario.chain_seed));
    let captured = Arc::new(Mutex::new(Vec::new()));
    let mut endpoints = Vec::new();
    let mut tasks = Vec::new();

    for index in 0..scenario.node_count {
        let port = ports.map(|p| p[index as usize]).unwrap_or(0);
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(MockError::PortAllocation)?;
        let addr = listener.local_addr().map_err(MockError::PortAllocation)?;
        let label = format!("node-{index}");

        let state = Arc::new(NodeState {
            endpoint_id: index,
            label: label.clone(),
            chain: Arc::clone(&chain),
            injections: scenario.injections.clone(),
            syncing: scenario.syncing_nodes.contains(&index),
            captured: Arc::clone(&captured),
        });
        let app = router(state);
        tasks.push(tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        }));

        endpoints.push(Endpoint {
            endpoint_id: index,
            label,
            base_url: format!("http://{addr}"),
            layer: scenario.layer,
            timeout_ms: scenario.endpoint_timeout_ms,
        });
    }

    Ok(FleetHandle { endpoints, chain, captured, tasks })
}

fn router(state: Arc<NodeState>) -> Router {
    Router::new()
        .route("/", post(el_handler))
        .route("/eth/v1/beacon/headers/:block_id", get(block_header_handler))
        .route("/eth/v1/node/peers", get(peers_handler))
        .route("/eth/v1/node/syncing", get(syncing_handler))
        .route("/eth/v1/beacon/blocks", post(publish_block_handler))
        .route("/__control/status", get(control_handler))
        .fallback(fallback_handler)
        .with_state(state)
}

fn json_response(status: u16, body: &Value) -> Response {
    let bytes = serde_json::to_vec(body).expect("response serializes");
    (
        StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
        [(header::CONTENT_TYPE, "application/json")],
        bytes,
    )
        .into_response()
}

async fn respond_injected(
    state: &NodeState,
    method: &str,
    request_body: &Value,
    request_path: Option<&str>,
    status: u16,
    body: Value,
) -> Response {
    let injected = apply_injections(
        &state.injections,
        state.endpoint_id,
        &state.label,
        method,
        request_body,
        request_path,
        status,
        body,
    );
    if injected.delay_ms > 0 {
        tokio::time::sleep(std::time::Duration::from_millis(injected.delay_ms)).await;
    }
    json_response(injected.status, &injected.body)
}

fn capture(state: &NodeState, method: &str, path: Option<&str>, body: &[u8]) {
    state.captured.lock().expect("capture lock").push(CapturedRequest {
        endpoint_id: state.endpoint_id,
        method: method.to_string(),
        path: path.map(str::to_string),
        body: body.to_vec(),
    });
}

async fn el_handler(State(state): State<Arc<NodeState>>, body: Bytes) -> Response {
    let parsed: Result<Value, _> = serde_json::from_slice(&body);
    let Ok(envelope) = parsed else {
        capture(&state, "<unparseable>", None, &body);
        let error = json!({"jsonrpc": "2.0", "id": null,
                           "error": {"code": -32700, "message": "parse error"}});
        return json_response(200, &error);
    };
    let method = envelope.get("method").and_then(Value::as_str).unwrap_or("").to_string();
    capture(&state, &method, None, &body);

    let id = envelope.get("id").cloned().unwrap_or(Value::Null);
    if method.is_empty() {
        let error = json!({"jsonrpc": "2.0", "id": id,
                           "error": {"code": -32600, "message": "invalid request"}});
        return json_response(200, &error);
    }
    let empty = Vec::new();
    let params = envelope.get("params").and_then(Value::as_array).unwrap_or(&empty);

    let (status, response) = canonical_el(&method, params, &id, &state.chain);
    respond_injected(&state, &method, &envelope, None, status, response).await
}

async fn block_header_handler(
    State(state): State<Arc<NodeState>>,
    Path(block_id): Path<String>,
) -> Response {
    let path = format!("/eth/v1/beacon/headers/{block_id}");
    capture(&state, "getBlockHeader", Some(&path), &[]);
    let op = RestOp::GetBlockHeader { block_id: crate::gen::request::percent_decode(&block_id) };
    let (status, body) = canonical_rest(&op, &state.chain);
    respond_injected(&state, "getBlockHeader", &Value::Null, Some(&path), status, body).await
}

async fn peers_handler(State(state): State<Arc<NodeState>>) -> Response {
    capture(&state, "getPeers", Some("/eth/v1/node/peers"), &[]);
    let (status, body) = canonical_rest(&RestOp::GetPeers, &state.chain);
    respond_injected(&state, "getPeers", &Value::Null, Some("/eth/v1/node/peers"), status, body)
        .await
}

async fn syncing_handler(State(state): State<Arc<NodeState>>) -> Response {
    capture(&state, "getSyncingStatus", Some("/eth/v1/node/syncing"), &[]);
    let (status, body) = canonical_rest(&RestOp::GetSyncing, &state.chain);
    respond_injected(
        &state,
        "getSyncingStatus",
        &Value::Null,
        Some("/eth/v1/node/syncing"),
        status,
        body,
    )
    .await
}

async fn publish_block_handler(State(state): State<Arc<NodeState>>, body: Bytes) -> Response {
    capture(&state, "publishBlock", Some("/eth/v1/beacon/blocks"), &body);
    let parsed: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let (status, response) =
        canonical_rest(&RestOp::PublishBlock { body: parsed.clone() }, &state.chain);
    respond_injected(
        &state,
        "publishBlock",
        &parsed,
        Some("/eth/v1/beacon/blocks"),
        status,
        response,
    )
    .await
}

async fn control_handler(State(state): State<Arc<NodeState>>) -> Response {
    // The readiness gate reads this; injections never touch it.
    let body = json!({
        "height": state.chain.tip().number,
        "finalized_epochs": state.chain.finalized_epochs,
        "syncing": state.syncing,
    });
    json_response(200, &body)
}

async fn fallback_handler() -> Response {
    json_response(404, &json!({"code": 404, "message": "Route not found"}))
}
