//! The schema subset used by specification documents.

use indexmap::IndexMap;
use serde_json::Value;

use super::policy::ConsistencyPolicy;

/// JSON type tag of a schema node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    String,
    Integer,
    Number,
    Boolean,
    Array,
    Object,
    Null,
    /// Unconstrained: every JSON value satisfies the node.
    Any,
}

impl SchemaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaKind::String => "string",
            SchemaKind::Integer => "integer",
            SchemaKind::Number => "number",
            SchemaKind::Boolean => "boolean",
            SchemaKind::Array => "array",
            SchemaKind::Object => "object",
            SchemaKind::Null => "null",
            SchemaKind::Any => "any",
        }
    }
}

/// One node of the supported schema subset.
///
/// The supported vocabulary is exactly `type`, `pattern`, `enum`, `anyOf`,
/// `properties`, `required`, `items`, `minItems`, `maxItems`,
/// `additionalProperties`, `title`, `description` plus the `x-` annotation
/// keys carrying consistency metadata. Anything else is rejected at parse
/// time rather than silently dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaNode {
    pub kind: SchemaKind,
    pub pattern: Option<String>,
    pub enum_values: Option<Vec<Value>>,
    pub any_of: Option<Vec<SchemaNode>>,
    pub properties: Option<IndexMap<String, SchemaNode>>,
    pub required: Option<Vec<String>>,
    pub items: Option<Box<SchemaNode>>,
    pub min_items: Option<usize>,
    pub max_items: Option<usize>,
    pub additional_properties_allowed: bool,
    pub title: Option<String>,
    pub description: Option<String>,
    pub consistency_policy: Option<ConsistencyPolicy>,
    /// Marks a may-divergent field as reflecting node-local state
    /// (sync status, head height and the like). Serialized as
    /// `x-environmental`.
    pub environmental: bool,
    /// Switches array comparison from index-wise to multiset.
    /// Serialized as `x-unordered`.
    pub unordered: bool,
}

impl SchemaNode {
    /// A bare node of the given kind with no constraints attached.
    pub fn of_kind(kind: SchemaKind) -> Self {
        SchemaNode {
            kind,
            pattern: None,
            enum_values: None,
            any_of: None,
            properties: None,
            required: None,
            items: None,
            min_items: None,
            max_items: None,
            additional_properties_allowed: true,
            title: None,
            description: None,
            consistency_policy: None,
            environmental: false,
            unordered: false,
        }
    }

    pub fn any() -> Self {
        Self::of_kind(SchemaKind::Any)
    }

    /// Checks the structural invariants of this node (not recursively).
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.pattern.is_some() && self.kind != SchemaKind::String {
            return Err(format!(
                "pattern is only valid on string schemas, found on kind {}",
                self.kind.as_str()
            ));
        }
        if (self.items.is_some() || self.min_items.is_some() || self.max_items.is_some())
            && self.kind != SchemaKind::Array
        {
            return Err(format!(
                "items/minItems/maxItems are only valid on array schemas, found on kind {}",
                self.kind.as_str()
            ));
        }
        if (self.properties.is_some() || self.required.is_some()) && self.kind != SchemaKind::Object
        {
            return Err(format!(
                "properties/required are only valid on object schemas, found on kind {}",
                self.kind.as_str()
            ));
        }
        if let (Some(min), Some(max)) = (self.min_items, self.max_items) {
            if min > max {
                return Err(format!("minItems {min} exceeds maxItems {max}"));
            }
        }
        if let Some(required) = &self.required {
            let props = self.properties.as_ref();
            for name in required {
                if props.map_or(true, |p| !p.contains_key(name)) {
                    return Err(format!("required field \"{name}\" is absent from properties"));
                }
            }
        }
        if let Some(any_of) = &self.any_of {
            if any_of.is_empty() {
                return Err("anyOf must list at least one alternative".to_string());
            }
        }
        if let Some(values) = &self.enum_values {
            if values.is_empty() {
                return Err("enum must list at least one value".to_string());
            }
        }
        Ok(())
    }

    /// Walks the node at a JSON-pointer-like path ("/a/0/b"). anyOf branches
    /// are tried in order; the first branch that resolves the full remainder
    /// wins. Returns `None` for unresolvable paths.
    pub fn resolve_path(&self, path: &str) -> Option<&SchemaNode> {
        let trimmed = path.trim_start_matches('/');
        if trimmed.is_empty() {
            return Some(self);
        }
        let segments: Vec<&str> = trimmed.split('/').collect();
        self.resolve_segments(&segments)
    }

    fn resolve_segments(&self, segments: &[&str]) -> Option<&SchemaNode> {
        if segments.is_empty() {
            return Some(self);
        }
        if let Some(branches) = &self.any_of {
            for branch in branches {
                if let Some(node) = branch.resolve_segments(segments) {
                    return Some(node);
                }
            }
            return None;
        }
        let (head, rest) = (segments[0], &segments[1..]);
        match self.kind {
            SchemaKind::Object => self
                .properties
                .as_ref()
                .and_then(|p| p.get(head))
                .and_then(|n| n.resolve_segments(rest)),
            SchemaKind::Array if head.chars().all(|c| c.is_ascii_digit()) => {
                self.items.as_ref().and_then(|n| n.resolve_segments(rest))
            }
            _ => None,
        }
    }
}
