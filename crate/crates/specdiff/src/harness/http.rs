//! Minimal HTTP wire layer shared by dispatch, readiness and fact
//! extraction.

use std::time::Duration;

use crate::gen::TestRequest;
use crate::spec::Transport;

/// A fully assembled HTTP request, bytes included, so the same body can be
/// sent to every endpoint verbatim.
#[derive(Debug, Clone)]
pub struct WireRequest {
    pub http_method: String,
    pub url: String,
    pub body: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Default)]
pub struct RawResponse {
    pub status: Option<u16>,
    pub body: Vec<u8>,
    pub error: Option<String>,
    pub timed_out: bool,
}

/// Builds the wire form of a test request against one base URL. `body_bytes`
/// is pre-serialized by the caller once per request.
pub fn wire_from_request(request: &TestRequest, base_url: &str, body_bytes: &[u8]) -> WireRequest {
    let base = base_url.trim_end_matches('/');
    match request.transport {
        Transport::JsonrpcPost => WireRequest {
            http_method: "POST".to_string(),
            url: base.to_string(),
            body: Some(body_bytes.to_vec()),
        },
        Transport::RestGet => WireRequest {
            http_method: "GET".to_string(),
            url: format!("{base}{}", request.path.as_deref().unwrap_or("/")),
            body: None,
        },
        Transport::RestPost => WireRequest {
            http_method: "POST".to_string(),
            url: format!("{base}{}", request.path.as_deref().unwrap_or("/")),
            body: Some(body_bytes.to_vec()),
        },
    }
}

/// Sends one request with a per-call timeout. Failures come back inside the
/// response value, never as panics or errors.
pub async fn send_wire(
    client: &reqwest::Client,
    wire: &WireRequest,
    timeout_ms: u64,
) -> RawResponse {
    let builder = match wire.http_method.as_str() {
        "GET" => client.get(&wire.url),
        _ => client.post(&wire.url),
    };
    let builder = builder.timeout(Duration::from_millis(timeout_ms));
    let builder = match &wire.body {
        Some(bytes) => builder
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(bytes.clone()),
        None => builder,
    };
    match builder.send().await {
        Ok(response) => {
            let status = response.status().as_u16();
            match response.bytes().await {
                Ok(bytes) => RawResponse {
                    status: Some(status),
                    body: bytes.to_vec(),
                    error: None,
                    timed_out: false,
                },
                Err(err) => RawResponse {
                    status: None,
                    body: Vec::new(),
                    timed_out: err.is_timeout(),
                    error: Some(err.to_string()),
                },
            }
        }
        Err(err) => RawResponse {
            status: None,
            body: Vec::new(),
            timed_out: err.is_timeout(),
            error: Some(err.to_string()),
        },
    }
}
