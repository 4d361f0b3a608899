//! Batch composition: a fixed mix of invalid, valid and semantically
//! enriched requests per method, deterministic under a seed.

use serde::{Deserialize, Serialize};

use crate::facts::{enrich, EnrichOutcome, FactStore};
use crate::spec::ApiSpec;
use crate::util::{method_seed, seeded_rng};

use super::request::{category_applicable, gen_invalid_request, gen_valid_request};
use super::{GenError, InvalidCategory, TestRequest};

/// How many requests of each validity tier to generate per method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestMix {
    pub invalid: usize,
    pub valid: usize,
    pub semantic: usize,
}

impl Default for TestMix {
    fn default() -> Self {
        TestMix { invalid: 5, valid: 5, semantic: 10 }
    }
}

impl TestMix {
    pub fn total(&self) -> usize {
        self.invalid + self.valid + self.semantic
    }

    /// Parses "a,b,c".
    pub fn parse(text: &str) -> Option<TestMix> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return None;
        }
        Some(TestMix {
            invalid: parts[0].parse().ok()?,
            valid: parts[1].parse().ok()?,
            semantic: parts[2].parse().ok()?,
        })
    }
}

impl std::fmt::Display for TestMix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.invalid, self.valid, self.semantic)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub requests: Vec<TestRequest>,
    /// Documented degradations (semantic slots that stayed syntactic).
    pub warnings: Vec<String>,
}

/// Generates the full batch for a spec. A pure function of
/// (spec, mix, seed, facts): identical inputs produce identical batches.
/// Semantic slots degrade to syntactic-valid with a warning when no fact
/// store is supplied or no bound param has facts.
pub fn gen_batch(
    spec: &ApiSpec,
    mix: TestMix,
    seed: u64,
    facts: Option<&FactStore>,
) -> Result<Batch, GenError> {
    let mut batch = Batch::default();
    let mut next_id: u64 = 1;

    for method in spec.methods.values() {
        let mut rng = seeded_rng(method_seed(seed, &method.name));

        let applicable: Vec<InvalidCategory> = InvalidCategory::ALL
            .into_iter()
            .filter(|category| category_applicable(method, *category))
            .collect();
        for slot in 0..mix.invalid {
            // Round-robin over applicable categories so that all three
            // violation kinds appear whenever the method allows them.
            let category = applicable[slot % applicable.len()];
            let request = gen_invalid_request(method, category, &mut rng, next_id, seed)?;
            next_id += 1;
            batch.requests.push(request);
        }

        for _ in 0..mix.valid {
            let request = gen_valid_request(method, &mut rng, next_id, seed)?;
            next_id += 1;
            batch.requests.push(request);
        }

        for _ in 0..mix.semantic {
            let request = gen_valid_request(method, &mut rng, next_id, seed)?;
            next_id += 1;
            match facts {
                Some(store) => {
                    let (request, outcome) = enrich(request, method, store, &mut rng);
                    if let EnrichOutcome::Degraded { reason } = &outcome {
                        batch.warnings.push(format!(
                            "{} request {} degraded to syntactic_valid: {reason}",
                            method.name, request.request_id
                        ));
                    }
                    batch.requests.push(request);
                }
                None => {
                    batch.warnings.push(format!(
                        "{} request {} degraded to syntactic_valid: no fact store",
                        method.name, request.request_id
                    ));
                    batch.requests.push(request);
                }
            }
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{requests_to_jsonl, Validity};
    use crate::spec::parse_spec;

    #[test]
    fn default_mix_yields_twenty_per_method() {
        let spec = parse_spec(crate::gen::tests::EL_SAMPLE_DOC).unwrap();
        let batch = gen_batch(&spec, TestMix::default(), 1, None).unwrap();
        assert_eq!(batch.requests.len(), 20 * spec.methods.len());
    }

    #[test]
    fn zero_mix_yields_empty_batch() {
        let spec = parse_spec(crate::gen::tests::EL_SAMPLE_DOC).unwrap();
        let batch =
            gen_batch(&spec, TestMix { invalid: 0, valid: 0, semantic: 0 }, 1, None).unwrap();
        assert!(batch.requests.is_empty());
    }

    #[test]
    fn same_seed_gives_byte_identical_batches() {
        let spec = parse_spec(crate::gen::tests::EL_SAMPLE_DOC).unwrap();
        let mix = TestMix::default();
        let a = gen_batch(&spec, mix, 42, None).unwrap();
        let b = gen_batch(&spec, mix, 42, None).unwrap();
        assert_eq!(requests_to_jsonl(&a.requests), requests_to_jsonl(&b.requests));
        let c = gen_batch(&spec, mix, 43, None).unwrap();
        assert_ne!(requests_to_jsonl(&a.requests), requests_to_jsonl(&c.requests));
    }

    #[test]
    fn all_three_categories_appear_when_applicable() {
        let spec = parse_spec(crate::gen::tests::EL_SAMPLE_DOC).unwrap();
        let batch =
            gen_batch(&spec, TestMix { invalid: 3, valid: 0, semantic: 0 }, 5, None).unwrap();
        let notes: Vec<&str> = batch
            .requests
            .iter()
            .filter(|r| r.method == "eth_getBalance")
            .filter_map(|r| r.fault_note.as_deref())
            .collect();
        assert_eq!(notes.len(), 3);
        for prefix in ["undefined field", "missing required", "constraint violation"] {
            assert!(
                notes.iter().any(|n| n.starts_with(prefix)),
                "category {prefix:?} missing from {notes:?}"
            );
        }
    }

    #[test]
    fn semantic_without_facts_degrades_with_warning() {
        let spec = parse_spec(crate::gen::tests::EL_SAMPLE_DOC).unwrap();
        let batch =
            gen_batch(&spec, TestMix { invalid: 0, valid: 0, semantic: 2 }, 5, None).unwrap();
        assert!(batch.requests.iter().all(|r| r.validity == Validity::SyntacticValid));
        assert_eq!(batch.warnings.len(), batch.requests.len());
    }

    #[test]
    fn mix_parses_from_cli_form() {
        assert_eq!(TestMix::parse("5,5,10"), Some(TestMix::default()));
        assert_eq!(TestMix::parse("1, 2, 3"), Some(TestMix { invalid: 1, valid: 2, semantic: 3 }));
        assert_eq!(TestMix::parse("1,2"), None);
    }
}
