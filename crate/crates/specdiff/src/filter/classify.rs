//! Verdict assignment: policy rules first, then the canonical tier, then
//! the oracle. Failures always degrade toward reporting, never toward
//! silence.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::harness::ReadinessReport;
use crate::spec::{ApiSpec, ConsistencyPolicy, SchemaNode, Transport};

use super::oracle::{EquivalenceOracle, OracleError};
use super::{canonical_equivalent, Divergence, DivergenceKind, Observed, Verdict, VerdictKind};

/// Upper bound on concurrent oracle consultations.
const ORACLE_PARALLELISM: usize = 4;

pub struct ClassifyContext<'a> {
    pub spec: &'a ApiSpec,
    pub method: &'a str,
    pub readiness: Option<&'a ReadinessReport>,
}

impl<'a> ClassifyContext<'a> {
    /// Schema node governing a body path, for canonical comparison and the
    /// oracle prompt.
    fn schema_at(&self, body_path: &str) -> Option<&'a SchemaNode> {
        let method = self.spec.method(self.method)?;
        let schema_path = match method.transport {
            Transport::JsonrpcPost => {
                let trimmed = body_path.trim_start_matches('/');
                trimmed.strip_prefix("result")?.to_string()
            }
            _ => body_path.to_string(),
        };
        method.result.resolve_path(&schema_path)
    }
}

fn verdict(value: VerdictKind, reason: impl Into<String>, oracle_used: bool) -> Verdict {
    Verdict { value, reason: reason.into(), oracle_used }
}

/// Classifies one divergence. The decision ladder:
/// availability handling, must-divergent (allowed variation),
/// environmental may-divergent (node state), canonical equivalence, and
/// finally the oracle. An unreachable oracle yields a genuine-bug verdict
/// with an explicit reason; nothing is ever dropped silently.
pub fn classify(
    divergence: &Divergence,
    ctx: &ClassifyContext<'_>,
    oracle: &dyn EquivalenceOracle,
) -> Verdict {
    if divergence.kind == DivergenceKind::Availability {
        let unavailable: Vec<u32> = divergence
            .per_endpoint_values
            .iter()
            .filter(|(_, observed)| matches!(observed, Observed::Unavailable(_)))
            .map(|(endpoint, _)| *endpoint)
            .collect();
        let all_syncing = !unavailable.is_empty()
            && unavailable.iter().all(|endpoint| {
                ctx.readiness.map(|report| report.is_syncing(*endpoint)).unwrap_or(false)
            });
        if all_syncing {
            return verdict(
                VerdictKind::FpEnvironmental,
                "unresponsive endpoints are reported as syncing",
                false,
            );
        }
        return verdict(VerdictKind::GenuineBug, "availability divergence", false);
    }

    match divergence.policy {
        ConsistencyPolicy::MustDivergent => {
            return verdict(
                VerdictKind::FpAllowed,
                "field is specified as must-divergent across implementations",
                false,
            );
        }
        ConsistencyPolicy::MayDivergent if divergence.environmental => {
            return verdict(
                VerdictKind::FpEnvironmental,
                "may-divergent field reflects environmental node state",
                false,
            );
        }
        _ => {}
    }

    let schema = ctx.schema_at(&divergence.field_path);
    let values: Vec<&Observed> = divergence.per_endpoint_values.values().collect();
    let all_present = values.iter().all(|o| matches!(o, Observed::Present(_)));
    if all_present {
        let present: Vec<&Value> = values
            .iter()
            .map(|o| match o {
                Observed::Present(v) => v,
                _ => unreachable!("checked all present"),
            })
            .collect();
        let all_equivalent = present
            .windows(2)
            .all(|pair| canonical_equivalent(pair[0], pair[1], schema));
        if all_equivalent {
            return verdict(
                VerdictKind::FpSemanticEquivalent,
                "canonical equivalence: values are equal after encoding normalization",
                false,
            );
        }
    }

    let responses: BTreeMap<u32, Value> = divergence
        .per_endpoint_values
        .iter()
        .map(|(endpoint, observed)| (*endpoint, observed.as_value()))
        .collect();
    match oracle.check(schema, &responses) {
        Ok(answer) if answer.semantically_equivalent => {
            verdict(VerdictKind::FpSemanticEquivalent, answer.reason, true)
        }
        Ok(answer) => verdict(VerdictKind::GenuineBug, answer.reason, true),
        Err(OracleError::Unconfigured(reason)) => {
            verdict(VerdictKind::GenuineBug, format!("oracle unavailable — conservative ({reason})"), false)
        }
        Err(_) => verdict(VerdictKind::GenuineBug, "oracle unavailable — conservative", false),
    }
}

/// Classifies a slice of divergences. Divergences that need the oracle run
/// with bounded parallelism; the output order matches the input order.
pub fn classify_all(
    divergences: &[Divergence],
    ctx: &ClassifyContext<'_>,
    oracle: &dyn EquivalenceOracle,
) -> Vec<Verdict> {
    if divergences.len() <= 1 {
        return divergences.iter().map(|d| classify(d, ctx, oracle)).collect();
    }
    let mut verdicts: Vec<Option<Verdict>> = vec![None; divergences.len()];
    for chunk in divergences
        .iter()
        .enumerate()
        .collect::<Vec<_>>()
        .chunks(ORACLE_PARALLELISM)
    {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(index, divergence)| {
                    let index = *index;
                    scope.spawn(move || (index, classify(divergence, ctx, oracle)))
                })
                .collect();
            for handle in handles {
                let (index, verdict) = handle.join().expect("classification does not panic");
                verdicts[index] = Some(verdict);
            }
        });
    }
    verdicts.into_iter().map(|v| v.expect("every slot classified")).collect()
}
