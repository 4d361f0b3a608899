//! Importers turning specification documents into [`ApiSpec`] values.
//!
//! Three document shapes are accepted and normalized into one model:
//! a neutral format (`methods` array with explicit transports), OpenRPC-like
//! documents (`methods` array, JSON-RPC transport implied, including a bare
//! single-method object), and REST-like documents (`paths` map keyed by
//! templates with per-verb operations). Schema constructs outside the
//! supported subset fail loudly with the offending method and path.

use indexmap::IndexMap;
use serde_json::Value;

use super::policy::ConsistencyPolicy;
use super::schema::{SchemaKind, SchemaNode};
use super::{ApiSpec, MethodSpec, ParamSpec, Transport};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("unrecognized document shape: {0}")]
    Dialect(String),
    #[error("unsupported construct \"{construct}\" in method {method} at {path}")]
    UnsupportedConstruct { method: String, path: String, construct: String },
    #[error("invariant violation in method {method} at {path}: {message}")]
    Invariant { method: String, path: String, message: String },
    #[error("sidecar names unknown method {method}")]
    UnknownSidecarMethod { method: String },
    #[error("sidecar names unknown param {param} of method {method}")]
    UnknownSidecarParam { method: String, param: String },
}

const SCHEMA_KEYS: &[&str] = &[
    "type",
    "pattern",
    "enum",
    "anyOf",
    "properties",
    "required",
    "items",
    "minItems",
    "maxItems",
    "additionalProperties",
    "title",
    "description",
    "x-consistency-policy",
    "x-environmental",
    "x-unordered",
];

/// Parses a specification document. The dialect is detected from the
/// document structure.
pub fn parse_spec(document: &str) -> Result<ApiSpec, SpecError> {
    let value: Value = serde_json::from_str(document).map_err(|e| SpecError::Json(e.to_string()))?;
    let Some(root) = value.as_object() else {
        return Err(SpecError::Dialect("top level must be a JSON object".to_string()));
    };

    let source_label = root
        .get("source_label")
        .and_then(Value::as_str)
        .or_else(|| root.get("info").and_then(|i| i.get("title")).and_then(Value::as_str))
        .unwrap_or("unlabeled")
        .to_string();

    let mut methods: IndexMap<String, MethodSpec> = IndexMap::new();
    if let Some(paths) = root.get("paths") {
        parse_rest_paths(paths, &mut methods)?;
    } else if let Some(method_list) = root.get("methods") {
        let Some(entries) = method_list.as_array() else {
            return Err(SpecError::Dialect("\"methods\" must be an array".to_string()));
        };
        for entry in entries {
            let method = parse_method(entry)?;
            insert_method(&mut methods, method)?;
        }
    } else if root.contains_key("name") && (root.contains_key("params") || root.contains_key("result"))
    {
        // A bare single-method document, like the published per-method specs.
        let method = parse_method(&value)?;
        insert_method(&mut methods, method)?;
    } else {
        return Err(SpecError::Dialect(
            "expected a \"methods\" array, a \"paths\" map, or a single method object".to_string(),
        ));
    }

    let source_label = if source_label == "unlabeled" && methods.len() == 1 {
        methods.keys().next().cloned().unwrap_or(source_label)
    } else {
        source_label
    };

    Ok(ApiSpec { methods, source_label })
}

fn insert_method(
    methods: &mut IndexMap<String, MethodSpec>,
    method: MethodSpec,
) -> Result<(), SpecError> {
    method.check_invariants().map_err(|message| SpecError::Invariant {
        method: method.name.clone(),
        path: String::new(),
        message,
    })?;
    if methods.contains_key(&method.name) {
        return Err(SpecError::Invariant {
            method: method.name.clone(),
            path: String::new(),
            message: "duplicate method name".to_string(),
        });
    }
    methods.insert(method.name.clone(), method);
    Ok(())
}

fn parse_method(entry: &Value) -> Result<MethodSpec, SpecError> {
    let Some(obj) = entry.as_object() else {
        return Err(SpecError::Dialect("method entries must be objects".to_string()));
    };
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| SpecError::Dialect("method entry is missing \"name\"".to_string()))?
        .to_string();

    for key in obj.keys() {
        if !matches!(
            key.as_str(),
            "name" | "summary" | "description" | "transport" | "path_template" | "params" | "result"
        ) {
            return Err(SpecError::UnsupportedConstruct {
                method: name.clone(),
                path: key.clone(),
                construct: key.clone(),
            });
        }
    }

    let summary = obj
        .get("summary")
        .or_else(|| obj.get("description"))
        .and_then(Value::as_str)
        .map(str::to_string);

    let path_template = obj.get("path_template").and_then(Value::as_str).map(str::to_string);
    let transport = match obj.get("transport").and_then(Value::as_str) {
        Some("jsonrpc_post") => Transport::JsonrpcPost,
        Some("rest_get") => Transport::RestGet,
        Some("rest_post") => Transport::RestPost,
        Some(other) => {
            return Err(SpecError::UnsupportedConstruct {
                method: name,
                path: "transport".to_string(),
                construct: other.to_string(),
            })
        }
        None if path_template.is_some() => {
            return Err(SpecError::Invariant {
                method: name,
                path: "transport".to_string(),
                message: "methods with a path template must declare a transport".to_string(),
            })
        }
        None => Transport::JsonrpcPost,
    };

    let mut params = Vec::new();
    if let Some(param_list) = obj.get("params") {
        let Some(entries) = param_list.as_array() else {
            return Err(SpecError::Invariant {
                method: name,
                path: "params".to_string(),
                message: "\"params\" must be an array".to_string(),
            });
        };
        for (index, entry) in entries.iter().enumerate() {
            params.push(parse_param(&name, index, entry)?);
        }
    }

    let result = match obj.get("result") {
        Some(result) => parse_wrapped_schema(&name, "result", result)?,
        None => SchemaNode::of_kind(SchemaKind::Null),
    };

    Ok(MethodSpec { name, transport, path_template, params, result, summary })
}

fn parse_param(method: &str, index: usize, entry: &Value) -> Result<ParamSpec, SpecError> {
    let Some(obj) = entry.as_object() else {
        return Err(SpecError::Invariant {
            method: method.to_string(),
            path: format!("params/{index}"),
            message: "param entries must be objects".to_string(),
        });
    };
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| SpecError::Invariant {
            method: method.to_string(),
            path: format!("params/{index}"),
            message: "param entry is missing \"name\"".to_string(),
        })?
        .to_string();
    for key in obj.keys() {
        if !matches!(key.as_str(), "name" | "required" | "schema" | "summary" | "description" | "in")
        {
            return Err(SpecError::UnsupportedConstruct {
                method: method.to_string(),
                path: format!("params/{name}"),
                construct: key.clone(),
            });
        }
    }
    let required = obj.get("required").and_then(Value::as_bool).unwrap_or(false);
    let schema = match obj.get("schema") {
        Some(schema) => parse_schema(method, &format!("params/{name}/schema"), schema)?,
        None => SchemaNode::any(),
    };
    Ok(ParamSpec { name, required, schema, semantic_type: None })
}

/// Accepts either a bare schema object or the `{name, schema}` wrapper used
/// around results.
fn parse_wrapped_schema(method: &str, path: &str, value: &Value) -> Result<SchemaNode, SpecError> {
    if let Some(obj) = value.as_object() {
        if let Some(inner) = obj.get("schema") {
            for key in obj.keys() {
                if !matches!(key.as_str(), "name" | "schema" | "summary" | "description") {
                    return Err(SpecError::UnsupportedConstruct {
                        method: method.to_string(),
                        path: path.to_string(),
                        construct: key.clone(),
                    });
                }
            }
            return parse_schema(method, &format!("{path}/schema"), inner);
        }
    }
    parse_schema(method, path, value)
}

fn parse_schema(method: &str, path: &str, value: &Value) -> Result<SchemaNode, SpecError> {
    let Some(obj) = value.as_object() else {
        return Err(SpecError::Invariant {
            method: method.to_string(),
            path: path.to_string(),
            message: "schema must be a JSON object".to_string(),
        });
    };

    for key in obj.keys() {
        if !SCHEMA_KEYS.contains(&key.as_str()) {
            return Err(SpecError::UnsupportedConstruct {
                method: method.to_string(),
                path: path.to_string(),
                construct: key.clone(),
            });
        }
    }

    let kind = match obj.get("type") {
        Some(Value::String(t)) => match t.as_str() {
            "string" => SchemaKind::String,
            "integer" => SchemaKind::Integer,
            "number" => SchemaKind::Number,
            "boolean" => SchemaKind::Boolean,
            "array" => SchemaKind::Array,
            "object" => SchemaKind::Object,
            "null" => SchemaKind::Null,
            "any" => SchemaKind::Any,
            other => {
                return Err(SpecError::UnsupportedConstruct {
                    method: method.to_string(),
                    path: format!("{path}/type"),
                    construct: other.to_string(),
                })
            }
        },
        Some(_) => {
            return Err(SpecError::UnsupportedConstruct {
                method: method.to_string(),
                path: format!("{path}/type"),
                construct: "non-string type".to_string(),
            })
        }
        // Inference for documents that omit "type" next to structural keys.
        None if obj.contains_key("properties") || obj.contains_key("required") => SchemaKind::Object,
        None if obj.contains_key("items")
            || obj.contains_key("minItems")
            || obj.contains_key("maxItems") =>
        {
            SchemaKind::Array
        }
        None if obj.contains_key("pattern") => SchemaKind::String,
        None => SchemaKind::Any,
    };

    let mut node = SchemaNode::of_kind(kind);
    node.title = obj.get("title").and_then(Value::as_str).map(str::to_string);
    node.description = obj.get("description").and_then(Value::as_str).map(str::to_string);

    if let Some(pattern) = obj.get("pattern") {
        let Some(pattern) = pattern.as_str() else {
            return Err(SpecError::Invariant {
                method: method.to_string(),
                path: format!("{path}/pattern"),
                message: "pattern must be a string".to_string(),
            });
        };
        if regex::Regex::new(pattern).is_err() {
            return Err(SpecError::UnsupportedConstruct {
                method: method.to_string(),
                path: format!("{path}/pattern"),
                construct: format!("uncompilable pattern {pattern:?}"),
            });
        }
        node.pattern = Some(pattern.to_string());
    }

    if let Some(values) = obj.get("enum") {
        let Some(values) = values.as_array() else {
            return Err(SpecError::Invariant {
                method: method.to_string(),
                path: format!("{path}/enum"),
                message: "enum must be an array".to_string(),
            });
        };
        node.enum_values = Some(values.clone());
    }

    if let Some(branches) = obj.get("anyOf") {
        let Some(branches) = branches.as_array() else {
            return Err(SpecError::Invariant {
                method: method.to_string(),
                path: format!("{path}/anyOf"),
                message: "anyOf must be an array".to_string(),
            });
        };
        let mut parsed = Vec::new();
        for (index, branch) in branches.iter().enumerate() {
            parsed.push(parse_schema(method, &format!("{path}/anyOf/{index}"), branch)?);
        }
        node.any_of = Some(parsed);
    }

    if let Some(properties) = obj.get("properties") {
        let Some(properties) = properties.as_object() else {
            return Err(SpecError::Invariant {
                method: method.to_string(),
                path: format!("{path}/properties"),
                message: "properties must be an object".to_string(),
            });
        };
        let mut parsed = IndexMap::new();
        for (name, schema) in properties {
            parsed.insert(
                name.clone(),
                parse_schema(method, &format!("{path}/properties/{name}"), schema)?,
            );
        }
        node.properties = Some(parsed);
    }

    if let Some(required) = obj.get("required") {
        let Some(required) = required.as_array() else {
            return Err(SpecError::Invariant {
                method: method.to_string(),
                path: format!("{path}/required"),
                message: "required must be an array".to_string(),
            });
        };
        let mut names = Vec::new();
        for name in required {
            let Some(name) = name.as_str() else {
                return Err(SpecError::Invariant {
                    method: method.to_string(),
                    path: format!("{path}/required"),
                    message: "required entries must be strings".to_string(),
                });
            };
            names.push(name.to_string());
        }
        node.required = Some(names);
    }

    if let Some(items) = obj.get("items") {
        node.items = Some(Box::new(parse_schema(method, &format!("{path}/items"), items)?));
    }
    node.min_items = parse_count(method, path, obj.get("minItems"), "minItems")?;
    node.max_items = parse_count(method, path, obj.get("maxItems"), "maxItems")?;

    if let Some(additional) = obj.get("additionalProperties") {
        let Some(flag) = additional.as_bool() else {
            return Err(SpecError::UnsupportedConstruct {
                method: method.to_string(),
                path: format!("{path}/additionalProperties"),
                construct: "schema-valued additionalProperties".to_string(),
            });
        };
        node.additional_properties_allowed = flag;
    }

    if let Some(policy) = obj.get("x-consistency-policy") {
        let parsed = policy.as_str().and_then(ConsistencyPolicy::parse);
        let Some(parsed) = parsed else {
            return Err(SpecError::Invariant {
                method: method.to_string(),
                path: format!("{path}/x-consistency-policy"),
                message: format!("unknown policy {policy}"),
            });
        };
        node.consistency_policy = Some(parsed);
    }
    node.environmental = obj.get("x-environmental").and_then(Value::as_bool).unwrap_or(false);
    node.unordered = obj.get("x-unordered").and_then(Value::as_bool).unwrap_or(false);

    node.check_invariants().map_err(|message| SpecError::Invariant {
        method: method.to_string(),
        path: path.to_string(),
        message,
    })?;
    Ok(node)
}

fn parse_count(
    method: &str,
    path: &str,
    value: Option<&Value>,
    key: &str,
) -> Result<Option<usize>, SpecError> {
    match value {
        None => Ok(None),
        Some(value) => match value.as_u64() {
            Some(n) => Ok(Some(n as usize)),
            None => Err(SpecError::Invariant {
                method: method.to_string(),
                path: format!("{path}/{key}"),
                message: format!("{key} must be a non-negative integer"),
            }),
        },
    }
}

fn parse_rest_paths(
    paths: &Value,
    methods: &mut IndexMap<String, MethodSpec>,
) -> Result<(), SpecError> {
    let Some(paths) = paths.as_object() else {
        return Err(SpecError::Dialect("\"paths\" must be an object".to_string()));
    };
    for (template, operations) in paths {
        let Some(operations) = operations.as_object() else {
            return Err(SpecError::Dialect(format!("path {template} must map verbs to operations")));
        };
        for (verb, op) in operations {
            let transport = match verb.as_str() {
                "get" => Transport::RestGet,
                "post" => Transport::RestPost,
                other => {
                    return Err(SpecError::UnsupportedConstruct {
                        method: template.clone(),
                        path: template.clone(),
                        construct: format!("HTTP verb {other}"),
                    })
                }
            };
            let method = parse_rest_operation(template, transport, op)?;
            insert_method(methods, method)?;
        }
    }
    Ok(())
}

fn parse_rest_operation(
    template: &str,
    transport: Transport,
    op: &Value,
) -> Result<MethodSpec, SpecError> {
    let Some(obj) = op.as_object() else {
        return Err(SpecError::Dialect(format!("operation under {template} must be an object")));
    };
    let name = obj
        .get("operationId")
        .and_then(Value::as_str)
        .ok_or_else(|| SpecError::Dialect(format!("operation under {template} lacks operationId")))?
        .to_string();
    for key in obj.keys() {
        if !matches!(key.as_str(), "operationId" | "summary" | "description" | "parameters" | "response" | "responses")
        {
            return Err(SpecError::UnsupportedConstruct {
                method: name.clone(),
                path: key.clone(),
                construct: key.clone(),
            });
        }
    }
    let summary = obj
        .get("summary")
        .or_else(|| obj.get("description"))
        .and_then(Value::as_str)
        .map(str::to_string);

    let mut params = Vec::new();
    if let Some(parameters) = obj.get("parameters") {
        let Some(entries) = parameters.as_array() else {
            return Err(SpecError::Invariant {
                method: name,
                path: "parameters".to_string(),
                message: "\"parameters\" must be an array".to_string(),
            });
        };
        for (index, entry) in entries.iter().enumerate() {
            params.push(parse_param(&name, index, entry)?);
        }
    }

    let result = if let Some(response) = obj.get("response") {
        parse_wrapped_schema(&name, "response", response)?
    } else if let Some(responses) = obj.get("responses") {
        let ok = responses
            .get("200")
            .ok_or_else(|| SpecError::Invariant {
                method: name.clone(),
                path: "responses".to_string(),
                message: "expected a \"200\" response entry".to_string(),
            })?;
        parse_wrapped_schema(&name, "responses/200", ok)?
    } else {
        SchemaNode::of_kind(SchemaKind::Null)
    };

    Ok(MethodSpec {
        name,
        transport,
        path_template: Some(template.to_string()),
        params,
        result,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The worked single-method document used throughout: two required
    /// params, a three-branch anyOf, quantity-patterned result.
    pub(crate) const GET_BALANCE_DOC: &str = r##"{
      "name": "eth_getBalance",
      "summary": "Returns the balance of the account of given address.",
      "params": [
        { "name": "Address", "required": true,
          "schema": { "title": "hex encoded address", "type": "string",
                      "pattern": "^0x[0-9a-fA-F]{40}$" } },
        { "name": "Block", "required": true,
          "schema": { "title": "Block number, tag, or block hash",
                      "anyOf": [
                        { "title": "Block number", "type": "string",
                          "pattern": "^0x(0|[1-9a-f][0-9a-f]*)$" },
                        { "title": "Block tag", "type": "string",
                          "enum": ["earliest", "finalized", "safe", "latest", "pending"] },
                        { "title": "Block hash", "type": "string",
                          "pattern": "^0x[0-9a-f]{64}$" } ] } } ],
      "result": {
        "name": "Balance",
        "schema": { "title": "hex encoded unsigned integer", "type": "string",
                    "pattern": "^0x(0|[1-9a-f][0-9a-f]*)$" } }
    }"##;

    #[test]
    fn parses_the_get_balance_document() {
        let spec = parse_spec(GET_BALANCE_DOC).unwrap();
        let method = spec.method("eth_getBalance").unwrap();
        assert_eq!(method.transport, Transport::JsonrpcPost);
        assert_eq!(method.params.len(), 2);
        assert!(method.params.iter().all(|p| p.required));
        assert_eq!(
            method.params[0].schema.pattern.as_deref(),
            Some("^0x[0-9a-fA-F]{40}$")
        );
        let block = &method.params[1].schema;
        let branches = block.any_of.as_ref().unwrap();
        assert_eq!(branches.len(), 3);
        assert_eq!(
            branches[1].enum_values.as_ref().unwrap().len(),
            5,
            "block tag branch lists five tags"
        );
        assert_eq!(
            method.result.pattern.as_deref(),
            Some("^0x(0|[1-9a-f][0-9a-f]*)$")
        );
    }

    #[test]
    fn empty_method_list_yields_empty_spec() {
        let spec = parse_spec(r#"{"methods": []}"#).unwrap();
        assert!(spec.methods.is_empty());
    }

    #[test]
    fn required_name_absent_from_properties_is_rejected() {
        let doc = r#"{
          "name": "m",
          "params": [],
          "result": { "schema": { "type": "object",
                                  "properties": {"a": {"type": "string"}},
                                  "required": ["b"] } }
        }"#;
        let err = parse_spec(doc).unwrap_err();
        assert!(matches!(err, SpecError::Invariant { .. }), "got {err}");
    }

    #[test]
    fn unsupported_constructs_name_method_and_path() {
        let doc = r##"{
          "name": "m",
          "params": [ { "name": "p", "schema": { "$ref": "#/x" } } ],
          "result": { "schema": {"type": "null"} }
        }"##;
        match parse_spec(doc).unwrap_err() {
            SpecError::UnsupportedConstruct { method, path, construct } => {
                assert_eq!(method, "m");
                assert!(path.contains("params/p"));
                assert_eq!(construct, "$ref");
            }
            other => panic!("expected unsupported-construct error, got {other}"),
        }
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = parse_spec("{\"methods\": [,]}").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line"), "location missing from: {text}");
    }

    #[test]
    fn rest_paths_are_imported_with_templates() {
        let doc = r#"{
          "source_label": "beacon",
          "paths": {
            "/eth/v1/beacon/headers/{block_id}": {
              "get": {
                "operationId": "getBlockHeader",
                "parameters": [
                  { "name": "block_id", "required": true, "in": "path",
                    "schema": { "type": "string", "pattern": "^[0-9]+$" } } ],
                "response": { "schema": { "type": "object" } }
              }
            }
          }
        }"#;
        let spec = parse_spec(doc).unwrap();
        let method = spec.method("getBlockHeader").unwrap();
        assert_eq!(method.transport, Transport::RestGet);
        assert_eq!(method.path_placeholders(), vec!["block_id".to_string()]);
    }

    #[test]
    fn path_placeholder_must_name_a_param() {
        let doc = r#"{
          "paths": {
            "/thing/{id}": { "get": { "operationId": "getThing", "parameters": [] } }
          }
        }"#;
        assert!(matches!(parse_spec(doc).unwrap_err(), SpecError::Invariant { .. }));
    }
}
