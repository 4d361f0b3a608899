//! Schema validation, used both as the generation oracle and when labeling
//! request validity.

use std::collections::HashMap;
use std::sync::Mutex;

use regex::Regex;
use serde_json::Value;

use super::schema::{SchemaKind, SchemaNode};

/// Compiled-pattern cache. Patterns are compiled at most once per process;
/// uncompilable patterns (rejected at parse time for specs we produced)
/// conservatively match nothing.
fn pattern_matches(pattern: &str, text: &str) -> bool {
    static CACHE: Mutex<Option<HashMap<String, Option<Regex>>>> = Mutex::new(None);
    let mut guard = CACHE.lock().unwrap();
    let cache = guard.get_or_insert_with(HashMap::new);
    let entry = cache
        .entry(pattern.to_string())
        .or_insert_with(|| Regex::new(pattern).ok());
    match entry {
        Some(regex) => regex.is_match(text),
        None => false,
    }
}

/// True iff `value` satisfies every constraint of `schema`. Total over all
/// JSON values; anyOf is satisfied by at least one branch.
pub fn validate_value(schema: &SchemaNode, value: &Value) -> bool {
    if let Some(branches) = &schema.any_of {
        if !branches.iter().any(|branch| validate_value(branch, value)) {
            return false;
        }
    }
    if let Some(allowed) = &schema.enum_values {
        if !allowed.contains(value) {
            return false;
        }
    }
    match schema.kind {
        SchemaKind::Any => true,
        SchemaKind::Null => value.is_null(),
        SchemaKind::Boolean => value.is_boolean(),
        SchemaKind::Integer => value.is_i64() || value.is_u64(),
        SchemaKind::Number => value.is_number(),
        SchemaKind::String => match value.as_str() {
            Some(text) => schema
                .pattern
                .as_deref()
                .map_or(true, |pattern| pattern_matches(pattern, text)),
            None => false,
        },
        SchemaKind::Array => {
            let Some(items) = value.as_array() else { return false };
            if schema.min_items.map_or(false, |min| items.len() < min) {
                return false;
            }
            if schema.max_items.map_or(false, |max| items.len() > max) {
                return false;
            }
            match &schema.items {
                Some(item_schema) => items.iter().all(|item| validate_value(item_schema, item)),
                None => true,
            }
        }
        SchemaKind::Object => {
            let Some(fields) = value.as_object() else { return false };
            if let Some(required) = &schema.required {
                if required.iter().any(|name| !fields.contains_key(name)) {
                    return false;
                }
            }
            let empty = indexmap::IndexMap::new();
            let properties = schema.properties.as_ref().unwrap_or(&empty);
            for (name, field_value) in fields {
                match properties.get(name) {
                    Some(field_schema) => {
                        if !validate_value(field_schema, field_value) {
                            return false;
                        }
                    }
                    None => {
                        if !schema.additional_properties_allowed {
                            return false;
                        }
                    }
                }
            }
            true
        }
    }
}
