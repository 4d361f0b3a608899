//! Test-request synthesis from parsed specifications: syntactically valid
//! requests, three categories of deliberately invalid requests, and batch
//! composition, all deterministic under a seed.

pub mod batch;
pub mod pattern;
pub mod request;
pub mod value;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::spec::Transport;

pub use batch::{gen_batch, Batch, TestMix};
pub use pattern::PatternSampler;
pub use request::{gen_invalid_request, gen_valid_request, request_passes_validator};
pub use value::gen_valid_value;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("unsupported regex construct ({construct}) in pattern {pattern:?}")]
    UnsupportedPattern { pattern: String, construct: String },
    #[error("unsatisfiable schema: {detail}")]
    Unsatisfiable { detail: String },
    #[error("invalid category {category} is not applicable to method {method}")]
    InapplicableCategory { method: String, category: String },
}

/// Validity tier of a generated request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    SyntacticInvalid,
    SyntacticValid,
    SemanticValid,
}

impl Validity {
    pub fn as_str(self) -> &'static str {
        match self {
            Validity::SyntacticInvalid => "syntactic_invalid",
            Validity::SyntacticValid => "syntactic_valid",
            Validity::SemanticValid => "semantic_valid",
        }
    }
}

/// The three structured violation categories for invalid requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidCategory {
    UndefinedField,
    MissingRequired,
    ConstraintViolation,
}

impl InvalidCategory {
    pub const ALL: [InvalidCategory; 3] = [
        InvalidCategory::UndefinedField,
        InvalidCategory::MissingRequired,
        InvalidCategory::ConstraintViolation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InvalidCategory::UndefinedField => "undefined field",
            InvalidCategory::MissingRequired => "missing required",
            InvalidCategory::ConstraintViolation => "constraint violation",
        }
    }
}

/// One concrete request ready for dispatch. Serialized as one JSON Lines
/// entry so any request replays standalone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRequest {
    pub request_id: u64,
    pub method: String,
    pub transport: Transport,
    /// Resolved REST path including query; `None` for JSON-RPC.
    pub path: Option<String>,
    /// JSON-RPC envelope or REST body (`null` for GET).
    pub body: Value,
    pub validity: Validity,
    /// Human-readable description of the injected violation, prefixed with
    /// the category name.
    pub fault_note: Option<String>,
    /// Generation choices and fact substitutions, for reproducibility.
    #[serde(default)]
    pub provenance: Vec<String>,
    pub seed: u64,
}

impl TestRequest {
    /// Positional JSON-RPC params, if this is a JSON-RPC request.
    pub fn jsonrpc_params(&self) -> Option<&Vec<Value>> {
        self.body.get("params").and_then(Value::as_array)
    }

    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

/// Serializes a batch as JSON Lines, one request per line.
pub fn requests_to_jsonl(requests: &[TestRequest]) -> String {
    let mut out = String::new();
    for request in requests {
        out.push_str(&request.to_jsonl());
        out.push('\n');
    }
    out
}

pub fn requests_from_jsonl(text: &str) -> Result<Vec<TestRequest>, serde_json::Error> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    /// Shared corpus document for generator tests: the worked
    /// account-balance method plus a zero-param and a REST method.
    pub(crate) const EL_SAMPLE_DOC: &str = r##"{
      "source_label": "sample-el",
      "methods": [
        { "name": "eth_getBalance", "transport": "jsonrpc_post",
          "summary": "Returns the balance of the account of given address.",
          "params": [
            { "name": "Address", "required": true,
              "schema": { "title": "hex encoded address", "type": "string",
                          "pattern": "^0x[0-9a-fA-F]{40}$" } },
            { "name": "Block", "required": true,
              "schema": { "title": "Block number, tag, or block hash",
                          "anyOf": [
                            { "title": "Block number", "type": "string",
                              "pattern": "^0x(0|[1-9a-f][0-9a-f]*)$" },
                            { "title": "Block tag", "type": "string",
                              "enum": ["earliest", "finalized", "safe", "latest", "pending"] },
                            { "title": "Block hash", "type": "string",
                              "pattern": "^0x[0-9a-f]{64}$" } ] } } ],
          "result": { "title": "hex encoded unsigned integer", "type": "string",
                      "pattern": "^0x(0|[1-9a-f][0-9a-f]*)$" } },
        { "name": "eth_blockNumber", "transport": "jsonrpc_post",
          "params": [],
          "result": { "type": "string", "pattern": "^0x(0|[1-9a-f][0-9a-f]*)$" } },
        { "name": "getBlockHeader", "transport": "rest_get",
          "path_template": "/eth/v1/beacon/headers/{block_id}",
          "params": [
            { "name": "block_id", "required": true,
              "schema": { "anyOf": [
                { "type": "string", "enum": ["head", "genesis", "finalized"] },
                { "type": "string", "pattern": "^[0-9]{1,6}$" } ] } } ],
          "result": { "type": "object" } }
      ]
    }"##;

    use super::*;

    #[test]
    fn jsonl_round_trips() {
        let request = TestRequest {
            request_id: 1,
            method: "eth_getBalance".to_string(),
            transport: Transport::JsonrpcPost,
            path: None,
            body: serde_json::json!({"id": 1, "jsonrpc": "2.0", "method": "eth_getBalance", "params": []}),
            validity: Validity::SyntacticValid,
            fault_note: None,
            provenance: vec!["anyOf branch 1 for param Block".to_string()],
            seed: 42,
        };
        let text = requests_to_jsonl(std::slice::from_ref(&request));
        let parsed = requests_from_jsonl(&text).unwrap();
        assert_eq!(parsed, vec![request]);
    }
}
