//! Extract live facts from a reference endpoint and enrich syntactically
//! valid requests into semantically valid ones.
//!
//! Run with: cargo run --example facts_and_enrichment

use std::path::Path;

use specdiff::facts::{extract_facts, FactRule};
use specdiff::gen::{gen_batch, TestMix, Validity};
use specdiff::harness::Layer;
use specdiff::mock::{spawn_fleet, FleetScenario};
use specdiff::pipeline::{load_spec, DEFAULT_FACT_RULES};

fn main() -> anyhow::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let scenario = FleetScenario {
        chain_seed: 7,
        node_count: 2,
        layer: Layer::El,
        injections: vec![],
        labels: vec![],
        endpoint_timeout_ms: 10_000,
        syncing_nodes: vec![],
    };
    let fleet = rt.block_on(spawn_fleet(&scenario))?;
    println!("mock fleet up at {:?}", fleet.endpoints.iter().map(|e| &e.base_url).collect::<Vec<_>>());

    let rules: Vec<FactRule> = serde_json::from_str(DEFAULT_FACT_RULES)?;
    let (store, report) = rt.block_on(extract_facts(&rules, &fleet.endpoints[0], None))?;
    println!(
        "extracted facts for {} parameter types ({} rule failures)",
        store.facts.len(),
        report.failed.len()
    );
    for (param_type, values) in &store.facts {
        println!("  {param_type}: {} values", values.len());
    }
    println!("anchors: current_block={:?} current_slot={:?}", store.current_block, store.current_slot);

    let base = Path::new(env!("CARGO_MANIFEST_DIR"));
    let spec = load_spec(
        &base.join("data/specs/el_api.json"),
        Some(&base.join("data/specs/el_api.semantic.json")),
    )?;
    let mix = TestMix { invalid: 0, valid: 0, semantic: 2 };
    let batch = gen_batch(&spec, mix, 7, Some(&store))?;

    println!("\nenriched requests:");
    for request in batch.requests.iter().filter(|r| r.validity == Validity::SemanticValid).take(4)
    {
        println!("  {}", serde_json::to_string(&request.body)?);
        for note in &request.provenance {
            if note.starts_with("semantic:") {
                println!("    {note}");
            }
        }
    }
    Ok(())
}
