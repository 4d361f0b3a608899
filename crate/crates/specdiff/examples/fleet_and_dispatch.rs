//! Spawn a mock fleet with an injected bug, gate on readiness, and fan one
//! request out to every node.
//!
//! Run with: cargo run --example fleet_and_dispatch

use serde_json::json;
use specdiff::gen::{TestRequest, Validity};
use specdiff::harness::{check_readiness, dispatch, Layer};
use specdiff::mock::{
    spawn_fleet, DivergenceInjection, FleetScenario, InjectionAction, NodeSelector,
};
use specdiff::spec::Transport;

fn main() -> anyhow::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let scenario = FleetScenario {
            chain_seed: 7,
            node_count: 3,
            layer: Layer::El,
            injections: vec![DivergenceInjection {
                node_selector: NodeSelector::Id(1),
                method: "eth_blockNumber".to_string(),
                action: InjectionAction::WrongValue {
                    path: "/result".to_string(),
                    value: json!("0x9999"),
                },
                trigger: None,
            }],
            labels: vec![],
            endpoint_timeout_ms: 10_000,
            syncing_nodes: vec![],
        };
        let fleet = spawn_fleet(&scenario).await?;

        let readiness = check_readiness(&fleet.endpoints, 5).await;
        println!("readiness: ready={} heights={:?}", readiness.ready,
            readiness.endpoints.iter().map(|e| e.height).collect::<Vec<_>>());

        let request = TestRequest {
            request_id: 1,
            method: "eth_blockNumber".to_string(),
            transport: Transport::JsonrpcPost,
            path: None,
            body: json!({"id": 1, "jsonrpc": "2.0", "method": "eth_blockNumber", "params": []}),
            validity: Validity::SyntacticValid,
            fault_note: None,
            provenance: vec![],
            seed: 0,
        };
        let records = dispatch(&request, &fleet.endpoints).await;
        println!("\nper-endpoint records (node 1 carries the injected wrong value):");
        for record in &records {
            println!(
                "  endpoint {} status {:?} body {}",
                record.endpoint_id,
                record.http_status,
                record.body.as_ref().map(|b| b.to_string()).unwrap_or_default()
            );
        }
        anyhow::Ok(())
    })?;
    Ok(())
}
