//! False-positive filtering: structural diff of records, policy
//! attachment, canonical equivalence, and oracle-backed classification.

pub mod canonical;
pub mod classify;
pub mod diff;
pub mod fdr;
pub mod oracle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gen::TestRequest;
use crate::spec::ConsistencyPolicy;

pub use canonical::canonical_equivalent;
pub use classify::{classify, classify_all, ClassifyContext};
pub use diff::diff_records;
pub use fdr::{compute_fdr, format_fdr, FdrError};
pub use oracle::{
    EquivalenceOracle, ExternalOracle, OracleAnswer, OracleBackendConfig, OracleError,
    StubFalseOracle, StubLookupOracle,
};

/// Structural kind of one divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    ValueMismatch,
    MissingField,
    ExtraField,
    TypeMismatch,
    StatusMismatch,
    /// One or more endpoints produced no HTTP response at all.
    Availability,
}

impl DivergenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceKind::ValueMismatch => "value_mismatch",
            DivergenceKind::MissingField => "missing_field",
            DivergenceKind::ExtraField => "extra_field",
            DivergenceKind::TypeMismatch => "type_mismatch",
            DivergenceKind::StatusMismatch => "status_mismatch",
            DivergenceKind::Availability => "availability",
        }
    }
}

/// What one endpoint contributed at a divergent path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "value", rename_all = "snake_case")]
pub enum Observed {
    Present(Value),
    Absent,
    /// No response (timeout or connection failure).
    Unavailable(String),
    /// Responded, but not with JSON.
    Unparseable,
}

impl Observed {
    pub fn as_value(&self) -> Value {
        match self {
            Observed::Present(value) => value.clone(),
            Observed::Absent => serde_json::json!({"$absent": true}),
            Observed::Unavailable(kind) => serde_json::json!({"$unavailable": kind}),
            Observed::Unparseable => serde_json::json!({"$non_json": true}),
        }
    }
}

/// One divergent field across the fleet, with its governing policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// JSON-pointer into the response body; "/$status" for status-code
    /// divergence, "/" for whole-body or availability divergence.
    pub field_path: String,
    pub kind: DivergenceKind,
    pub per_endpoint_values: BTreeMap<u32, Observed>,
    pub policy: ConsistencyPolicy,
    /// Environmental tag carried over from the schema annotation.
    pub environmental: bool,
}

/// Final classification of one divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    GenuineBug,
    FpEnvironmental,
    FpAllowed,
    FpSemanticEquivalent,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::GenuineBug => "genuine_bug",
            VerdictKind::FpEnvironmental => "fp_environmental",
            VerdictKind::FpAllowed => "fp_allowed",
            VerdictKind::FpSemanticEquivalent => "fp_semantic_equivalent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictKind,
    pub reason: String,
    pub oracle_used: bool,
}

/// All divergences of one request with their verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Finding {
    pub request: TestRequest,
    pub divergences: Vec<Divergence>,
    pub verdicts: Vec<Verdict>,
    /// True iff any divergence was classified as a genuine bug.
    pub overall_genuine: bool,
}

impl Finding {
    pub fn new(request: TestRequest, divergences: Vec<Divergence>, verdicts: Vec<Verdict>) -> Self {
        assert_eq!(divergences.len(), verdicts.len(), "one verdict per divergence");
        let overall_genuine =
            verdicts.iter().any(|verdict| verdict.value == VerdictKind::GenuineBug);
        Finding { request, divergences, verdicts, overall_genuine }
    }
}
