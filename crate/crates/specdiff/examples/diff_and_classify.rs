//! Diff divergent responses and classify each divergence: policy rules,
//! the canonical tier, then the lookup oracle.
//!
//! Run with: cargo run --example diff_and_classify

use std::path::Path;

use serde_json::{json, Value};
use specdiff::filter::{classify, diff_records, ClassifyContext, StubLookupOracle};
use specdiff::harness::ResponseRecord;
use specdiff::spec::parse_spec;

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

fn main() -> anyhow::Result<()> {
    let spec = parse_spec(
        r#"{"methods": [
          { "name": "demo", "transport": "jsonrpc_post", "params": [],
            "result": {"type": "object", "properties": {
              "balance": {"title": "hex encoded unsigned integer", "type": "string",
                          "pattern": "^0x(0|[1-9a-f][0-9a-f]*)$"},
              "peer_id": {"type": "string", "x-consistency-policy": "must-divergent"},
              "message": {"type": "string"}}} }
        ]}"#,
    )?;

    // Three endpoints that disagree in three different ways.
    let records = vec![
        record(0, json!({"result": {"balance": "0x1a", "peer_id": "peerA",
                                     "message": "Unable to decode data"}})),
        record(1, json!({"result": {"balance": "0x01a", "peer_id": "peerB",
                                     "message": "Unable to decode data"}})),
        record(2, json!({"result": {"balance": "0x1a", "peer_id": "peerC",
                                     "message": "could not decode request body into the expected shape"}})),
    ];

    let divergences = diff_records(&records, &spec, "demo");
    println!("{} divergent field paths\n", divergences.len());

    let lookup = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/oracle/lookup_pairs.json");
    let oracle = StubLookupOracle::from_json(&std::fs::read_to_string(lookup)?)?;
    let ctx = ClassifyContext { spec: &spec, method: "demo", readiness: None };

    for divergence in &divergences {
        let verdict = classify(divergence, &ctx, &oracle);
        println!(
            "{} [{} / {}] -> {}\n    reason: {} (oracle consulted: {})",
            divergence.field_path,
            divergence.kind.as_str(),
            divergence.policy.as_str(),
            verdict.value.as_str(),
            verdict.reason,
            verdict.oracle_used,
        );
    }
    Ok(())
}
