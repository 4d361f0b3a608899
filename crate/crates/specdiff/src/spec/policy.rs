//! Per-field consistency policies and the classifiers that assign them.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Expected cross-endpoint behavior of one response field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConsistencyPolicy {
    /// Deterministic consensus state; any difference is suspect.
    #[serde(rename = "must-identical")]
    MustIdentical,
    /// Node-local state that may legitimately differ.
    #[serde(rename = "may-divergent")]
    MayDivergent,
    /// Unique instance identity; differences are expected.
    #[serde(rename = "must-divergent")]
    MustDivergent,
}

impl ConsistencyPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ConsistencyPolicy::MustIdentical => "must-identical",
            ConsistencyPolicy::MayDivergent => "may-divergent",
            ConsistencyPolicy::MustDivergent => "must-divergent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "must-identical" => Some(ConsistencyPolicy::MustIdentical),
            "may-divergent" => Some(ConsistencyPolicy::MayDivergent),
            "must-divergent" => Some(ConsistencyPolicy::MustDivergent),
            _ => None,
        }
    }
}

impl fmt::Display for ConsistencyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a classifier sees when labeling one leaf field.
#[derive(Debug, Clone)]
pub struct FieldContext<'a> {
    pub method: &'a str,
    pub method_summary: Option<&'a str>,
    pub field_path: String,
    pub title: Option<&'a str>,
    pub description: Option<&'a str>,
    pub kind: super::schema::SchemaKind,
}

/// A classifier's decision for one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyDecision {
    pub policy: ConsistencyPolicy,
    /// Node-state tag used by the environmental false-positive rule.
    pub environmental: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("policy classification failed for {method} at {field_path}: {reason}")]
pub struct ClassifierError {
    pub method: String,
    pub field_path: String,
    pub reason: String,
}

/// Assigns a consistency policy to each unlabeled leaf of a result schema.
pub trait PolicyClassifier {
    fn classify(&self, ctx: &FieldContext<'_>) -> Result<PolicyDecision, ClassifierError>;
}

/// Keyword rule table mapping field names and descriptions onto policies.
///
/// Unmatched fields default to must-identical, which is the conservative
/// choice: a wrongly strict label surfaces a divergence for the filter
/// stage to judge instead of suppressing it outright.
#[derive(Debug, Default, Clone)]
pub struct RuleClassifier;

const MUST_DIVERGENT_HINTS: &[&str] = &[
    "peer_id",
    "peer id",
    "node_id",
    "enr",
    "enode",
    "public key",
    "pubkey",
    "unique",
    "instance identity",
];

const ENVIRONMENTAL_HINTS: &[&str] = &[
    "syncing",
    "sync_distance",
    "sync distance",
    "is_optimistic",
    "el_offline",
    "head_slot",
    "uptime",
    "timestamp of the node",
    "local time",
];

const MAY_DIVERGENT_HINTS: &[&str] = &[
    "client version",
    "client name",
    "user agent",
    "build info",
    "direction",
    "connection state",
];

impl PolicyClassifier for RuleClassifier {
    fn classify(&self, ctx: &FieldContext<'_>) -> Result<PolicyDecision, ClassifierError> {
        let haystack = format!(
            "{} {} {}",
            ctx.field_path.to_ascii_lowercase(),
            ctx.title.unwrap_or("").to_ascii_lowercase(),
            ctx.description.unwrap_or("").to_ascii_lowercase()
        );
        if MUST_DIVERGENT_HINTS.iter().any(|h| haystack.contains(h)) {
            return Ok(PolicyDecision { policy: ConsistencyPolicy::MustDivergent, environmental: false });
        }
        if ENVIRONMENTAL_HINTS.iter().any(|h| haystack.contains(h)) {
            return Ok(PolicyDecision { policy: ConsistencyPolicy::MayDivergent, environmental: true });
        }
        if MAY_DIVERGENT_HINTS.iter().any(|h| haystack.contains(h)) {
            return Ok(PolicyDecision { policy: ConsistencyPolicy::MayDivergent, environmental: false });
        }
        Ok(PolicyDecision { policy: ConsistencyPolicy::MustIdentical, environmental: false })
    }
}
