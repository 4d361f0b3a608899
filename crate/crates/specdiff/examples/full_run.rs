//! The whole pipeline end to end on the labeled fault-injection scenario:
//! spawn the fleet, extract facts, generate, dispatch, filter, and report
//! discovery-rate metrics with and without the filter.
//!
//! Run with: cargo run --example full_run

use std::path::Path;

use specdiff::gen::TestMix;
use specdiff::pipeline::{cmd_run, FleetSource, OracleMode, RunSettings};

fn main() -> anyhow::Result<()> {
    let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let settings = RunSettings {
        spec_path: base.join("specs/el_labeled.json"),
        sidecar_path: Some(base.join("specs/el_labeled.semantic.json")),
        rules_path: None,
        fleet: FleetSource::Scenario(base.join("scenarios/labeled_fdr.json")),
        mix: TestMix::default(),
        seed: 1,
        oracle: OracleMode::StubLookup(base.join("oracle/lookup_pairs.json")),
        report_dir: None,
        threshold_epochs: 5,
        skip_readiness: false,
        timeout_ms: None,
    };

    let outcome = cmd_run(&settings)?;
    let report = &outcome.report;
    println!(
        "{} requests -> {} divergence groups: {} genuine, {} allowed, {} equivalent, {} environmental",
        report.total_requests,
        report.divergence_groups,
        report.findings.len(),
        report.filtered.allowed,
        report.filtered.semantic_equivalent,
        report.filtered.environmental,
    );

    if let Some(metrics) = &report.metrics {
        println!(
            "FDR with filter: {} ({} TP / {} FP); without filter: {} ({} TP / {} FP)",
            metrics.fdr_with_filter.as_deref().unwrap_or("n/a"),
            metrics.tp_with_filter,
            metrics.fp_with_filter,
            metrics.fdr_without_filter.as_deref().unwrap_or("n/a"),
            metrics.tp_without_filter,
            metrics.fp_without_filter,
        );
    }

    println!("\ngenuine findings:");
    for finding in &report.findings {
        println!(
            "  {} {} ({}, seen {} times)",
            finding.method,
            finding.field_path,
            finding.kind.as_str(),
            finding.occurrences
        );
    }
    println!("\nexit code would be {}", outcome.exit_code);
    Ok(())
}
