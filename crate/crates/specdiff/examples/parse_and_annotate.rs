//! Parse a specification document and annotate every result field with a
//! consistency policy.
//!
//! Run with: cargo run --example parse_and_annotate

use std::path::Path;

use specdiff::spec::{annotate_policies, emit::spec_to_string, parse_spec, RuleClassifier};

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/specs/el_api.json");
    let spec = parse_spec(&std::fs::read_to_string(path)?)?;
    println!("parsed {} methods from {:?}", spec.methods.len(), spec.source_label);

    let method = spec.method("eth_getBalance").expect("corpus ships the balance query");
    println!(
        "eth_getBalance takes {} params; the block selector offers {} alternatives",
        method.params.len(),
        method.params[1].schema.any_of.as_ref().map(Vec::len).unwrap_or(0),
    );

    let (annotated, summary) = annotate_policies(&spec, &RuleClassifier)?;
    println!("\npolicy audit (field path -> policy):");
    print!("{}", summary.render());

    let rendered = spec_to_string(&annotated);
    let snippet: String = rendered
        .lines()
        .skip_while(|line| !line.contains("x-consistency-policy"))
        .take(1)
        .collect();
    println!("\nannotated form carries policies inline, e.g.:{snippet}");
    Ok(())
}
