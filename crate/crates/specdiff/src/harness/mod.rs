//! Differential execution: fan-out of identical requests across a fleet of
//! endpoints, readiness gating, and response recording.

pub mod dispatch;
pub mod http;
pub mod readiness;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use dispatch::{dispatch, run_round, RoundEntry, RoundLog, RoundOptions};
pub use readiness::{check_readiness, EndpointReadiness, ReadinessReport};

/// Which API family an endpoint serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    El,
    Cl,
}

impl Layer {
    /// The layer a request transport targets.
    pub fn for_transport(transport: crate::spec::Transport) -> Layer {
        match transport {
            crate::spec::Transport::JsonrpcPost => Layer::El,
            _ => Layer::Cl,
        }
    }
}

/// One endpoint of the fleet under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub endpoint_id: u32,
    pub label: String,
    pub base_url: String,
    pub layer: Layer,
    pub timeout_ms: u64,
}

/// Transport-level failure modes recorded instead of thrown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportErrorKind {
    Timeout,
    ConnectFailure,
    /// The endpoint answered, but the body did not parse as JSON.
    NonJson,
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(deserializer)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

/// One endpoint's answer to one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub endpoint_id: u32,
    pub request_id: u64,
    /// Absent on transport failure.
    pub http_status: Option<u16>,
    /// Parsed body; absent if the response was not JSON or never arrived.
    pub body: Option<Value>,
    /// Exact bytes received, preserved for replay comparison.
    #[serde(with = "base64_bytes")]
    pub raw_body: Vec<u8>,
    pub transport_error: Option<TransportErrorKind>,
    pub latency_ms: u64,
}

impl ResponseRecord {
    /// True when no HTTP response arrived at all.
    pub fn is_unavailable(&self) -> bool {
        matches!(
            self.transport_error,
            Some(TransportErrorKind::Timeout) | Some(TransportErrorKind::ConnectFailure)
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("fleet not ready: {}", .0.failures.join("; "))]
    NotReady(ReadinessReport),
    #[error("no endpoint in the fleet serves {layer:?} requests (method {method})")]
    NoEndpointsForLayer { layer: Layer, method: String },
    #[error("round log I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("round log line {line} is malformed: {message}")]
    MalformedLog { line: usize, message: String },
}

/// Reads a fleet configuration file: a JSON array of endpoints.
pub fn fleet_from_json(text: &str) -> Result<Vec<Endpoint>, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn fleet_to_json(fleet: &[Endpoint]) -> String {
    let mut out = serde_json::to_string_pretty(fleet).expect("fleet serializes");
    out.push('\n');
    out
}
