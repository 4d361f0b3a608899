//! Specification-guided differential testing for fleets of independent
//! API implementations.
//!
//! The pipeline has three phases. First, test requests — syntactically
//! valid, deliberately invalid, and semantically enriched with live facts —
//! are generated from machine-readable API specifications. Second, each
//! request is dispatched unchanged to every endpoint of a fleet and the
//! responses are recorded. Third, response divergences are diffed
//! structurally, labeled with per-field consistency policies, and filtered
//! through canonicalization plus a pluggable equivalence oracle so that
//! only genuine implementation bugs remain.
//!
//! A deterministic in-process mock fleet ([`mock`]) serves as the test
//! substrate: every node answers from the same synthetic chain, and
//! per-node divergence injections simulate implementation bugs.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod facts;
pub mod filter;
pub mod gen;
pub mod harness;
pub mod mock;
pub mod pipeline;
pub mod report;
pub mod spec;
pub mod util;

pub use spec::{ApiSpec, ConsistencyPolicy, MethodSpec, SchemaNode, Transport};
