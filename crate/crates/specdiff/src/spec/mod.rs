//! Parsed API specifications: methods, parameter schemas, result schemas
//! and per-field consistency policies.

pub mod annotate;
pub mod emit;
pub mod parse;
pub mod policy;
pub mod schema;
pub mod validate;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use annotate::{annotate_policies, AnnotationSummary};
pub use parse::{parse_spec, SpecError};
pub use policy::{
    ClassifierError, ConsistencyPolicy, FieldContext, PolicyClassifier, PolicyDecision,
    RuleClassifier,
};
pub use schema::{SchemaKind, SchemaNode};
pub use validate::validate_value;

/// How requests for a method travel on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    JsonrpcPost,
    RestGet,
    RestPost,
}

impl Transport {
    pub fn is_rest(self) -> bool {
        matches!(self, Transport::RestGet | Transport::RestPost)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Transport::JsonrpcPost => "jsonrpc_post",
            Transport::RestGet => "rest_get",
            Transport::RestPost => "rest_post",
        }
    }
}

/// One declared parameter of a method.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub required: bool,
    pub schema: SchemaNode,
    /// Semantic type binding ("address", "block_number", ...) supplied by a
    /// sidecar file; drives fact-based enrichment.
    pub semantic_type: Option<String>,
}

/// One method (JSON-RPC) or operation (REST) of the specification.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub transport: Transport,
    /// REST only: path with `{placeholder}` segments naming params.
    pub path_template: Option<String>,
    pub params: Vec<ParamSpec>,
    pub result: SchemaNode,
    pub summary: Option<String>,
}

impl MethodSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Names of the placeholders in the path template, in order.
    pub fn path_placeholders(&self) -> Vec<String> {
        let Some(template) = &self.path_template else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut rest = template.as_str();
        while let Some(start) = rest.find('{') {
            let Some(end) = rest[start..].find('}') else { break };
            out.push(rest[start + 1..start + end].to_string());
            rest = &rest[start + end + 1..];
        }
        out
    }

    fn check_invariants(&self) -> Result<(), String> {
        match (self.transport.is_rest(), &self.path_template) {
            (true, None) => return Err("REST method is missing a path template".to_string()),
            (false, Some(_)) => {
                return Err("path template is only valid on REST methods".to_string())
            }
            _ => {}
        }
        for placeholder in self.path_placeholders() {
            if self.param(&placeholder).is_none() {
                return Err(format!(
                    "path placeholder {{{placeholder}}} does not name a declared param"
                ));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for param in &self.params {
            if !seen.insert(param.name.as_str()) {
                return Err(format!("duplicate param name \"{}\"", param.name));
            }
        }
        Ok(())
    }
}

/// A full parsed specification document.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiSpec {
    pub methods: IndexMap<String, MethodSpec>,
    pub source_label: String,
}

impl ApiSpec {
    pub fn method(&self, name: &str) -> Option<&MethodSpec> {
        self.methods.get(name)
    }

    /// Attaches semantic-type bindings from a sidecar map
    /// (method name -> param name -> semantic type).
    pub fn apply_semantic_types(
        &mut self,
        sidecar: &IndexMap<String, IndexMap<String, String>>,
    ) -> Result<(), SpecError> {
        for (method_name, bindings) in sidecar {
            let Some(method) = self.methods.get_mut(method_name) else {
                return Err(SpecError::UnknownSidecarMethod { method: method_name.clone() });
            };
            for (param_name, semantic_type) in bindings {
                let Some(param) = method.params.iter_mut().find(|p| &p.name == param_name) else {
                    return Err(SpecError::UnknownSidecarParam {
                        method: method_name.clone(),
                        param: param_name.clone(),
                    });
                };
                param.semantic_type = Some(semantic_type.clone());
            }
        }
        Ok(())
    }

    /// Policy and environmental tag governing a body path of a method's
    /// response. JSON-RPC bodies are envelopes, so `/result/...` paths are
    /// resolved against the result schema and envelope or error paths fall
    /// back to the default. Unresolvable paths get the conservative default.
    pub fn policy_at(&self, method: &str, body_path: &str) -> PolicyDecision {
        let default = PolicyDecision {
            policy: ConsistencyPolicy::MustIdentical,
            environmental: false,
        };
        let Some(spec) = self.method(method) else { return default };
        let schema_path = match spec.transport {
            Transport::JsonrpcPost => {
                let trimmed = body_path.trim_start_matches('/');
                match trimmed.strip_prefix("result") {
                    Some(rest) => rest.to_string(),
                    // Envelope and error fields carry no schema annotation.
                    None => return default,
                }
            }
            _ => body_path.to_string(),
        };
        match spec.result.resolve_path(&schema_path) {
            Some(node) => PolicyDecision {
                policy: node.consistency_policy.unwrap_or(ConsistencyPolicy::MustIdentical),
                environmental: node.environmental,
            },
            None => default,
        }
    }

    /// True when the array at the given body path is annotated for
    /// order-insensitive comparison.
    pub fn unordered_at(&self, method: &str, body_path: &str) -> bool {
        let Some(spec) = self.method(method) else { return false };
        let schema_path = match spec.transport {
            Transport::JsonrpcPost => {
                let trimmed = body_path.trim_start_matches('/');
                match trimmed.strip_prefix("result") {
                    Some(rest) => rest.to_string(),
                    None => return false,
                }
            }
            _ => body_path.to_string(),
        };
        spec.result
            .resolve_path(&schema_path)
            .map(|node| node.unordered)
            .unwrap_or(false)
    }
}
