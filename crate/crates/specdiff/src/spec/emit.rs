//! Re-serialization of a parsed spec into the neutral document format.
//!
//! Emission is a pure function of the [`ApiSpec`] value with a fixed key
//! order, so annotate-then-emit pipelines are byte-stable.

use serde_json::{json, Map, Value};

use super::schema::{SchemaKind, SchemaNode};
use super::{ApiSpec, MethodSpec};

/// Renders the spec as a neutral-format document value.
pub fn spec_to_document(spec: &ApiSpec) -> Value {
    let methods: Vec<Value> = spec.methods.values().map(method_to_value).collect();
    json!({
        "source_label": spec.source_label,
        "methods": methods,
    })
}

/// Renders the spec as pretty-printed JSON with a trailing newline.
pub fn spec_to_string(spec: &ApiSpec) -> String {
    let mut out = serde_json::to_string_pretty(&spec_to_document(spec)).expect("spec serializes");
    out.push('\n');
    out
}

fn method_to_value(method: &MethodSpec) -> Value {
    let mut obj = Map::new();
    obj.insert("name".to_string(), json!(method.name));
    obj.insert("transport".to_string(), json!(method.transport.as_str()));
    if let Some(template) = &method.path_template {
        obj.insert("path_template".to_string(), json!(template));
    }
    if let Some(summary) = &method.summary {
        obj.insert("summary".to_string(), json!(summary));
    }
    let params: Vec<Value> = method
        .params
        .iter()
        .map(|param| {
            let mut p = Map::new();
            p.insert("name".to_string(), json!(param.name));
            p.insert("required".to_string(), json!(param.required));
            p.insert("schema".to_string(), schema_to_value(&param.schema));
            Value::Object(p)
        })
        .collect();
    obj.insert("params".to_string(), Value::Array(params));
    obj.insert("result".to_string(), schema_to_value(&method.result));
    Value::Object(obj)
}

pub fn schema_to_value(schema: &SchemaNode) -> Value {
    let mut obj = Map::new();
    if let Some(title) = &schema.title {
        obj.insert("title".to_string(), json!(title));
    }
    if let Some(description) = &schema.description {
        obj.insert("description".to_string(), json!(description));
    }
    if schema.kind != SchemaKind::Any || schema.any_of.is_none() {
        obj.insert("type".to_string(), json!(schema.kind.as_str()));
    }
    if let Some(pattern) = &schema.pattern {
        obj.insert("pattern".to_string(), json!(pattern));
    }
    if let Some(values) = &schema.enum_values {
        obj.insert("enum".to_string(), Value::Array(values.clone()));
    }
    if let Some(branches) = &schema.any_of {
        obj.insert(
            "anyOf".to_string(),
            Value::Array(branches.iter().map(schema_to_value).collect()),
        );
    }
    if let Some(properties) = &schema.properties {
        let mut props = Map::new();
        for (name, node) in properties {
            props.insert(name.clone(), schema_to_value(node));
        }
        obj.insert("properties".to_string(), Value::Object(props));
    }
    if let Some(required) = &schema.required {
        obj.insert("required".to_string(), json!(required));
    }
    if let Some(items) = &schema.items {
        obj.insert("items".to_string(), schema_to_value(items));
    }
    if let Some(min) = schema.min_items {
        obj.insert("minItems".to_string(), json!(min));
    }
    if let Some(max) = schema.max_items {
        obj.insert("maxItems".to_string(), json!(max));
    }
    if !schema.additional_properties_allowed {
        obj.insert("additionalProperties".to_string(), json!(false));
    }
    if let Some(policy) = schema.consistency_policy {
        obj.insert("x-consistency-policy".to_string(), json!(policy.as_str()));
    }
    if schema.environmental {
        obj.insert("x-environmental".to_string(), json!(true));
    }
    if schema.unordered {
        obj.insert("x-unordered".to_string(), json!(true));
    }
    Value::Object(obj)
}
