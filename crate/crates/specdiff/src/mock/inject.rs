//! Per-node divergence injection: controlled perturbations of canonical
//! responses that simulate implementation bugs.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Which node an injection applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSelector {
    Id(u32),
    Label(String),
}

impl NodeSelector {
    pub fn matches(&self, endpoint_id: u32, label: &str) -> bool {
        match self {
            NodeSelector::Id(id) => *id == endpoint_id,
            NodeSelector::Label(l) => l == label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionAction {
    DropField { path: String },
    ExtraField { path: String, value: Value },
    /// Re-encodes the value at a path without changing its meaning.
    Reformat { path: String, transform: String },
    WrongValue { path: String, value: Value },
    WrongStatus { code: u16 },
    /// Replaces the message of error responses for the method.
    ErrorMessage { text: String },
    Stall { ms: u64 },
    /// Responds 500 with a crash-style error body.
    CrashMessage { text: String },
}

/// Optional predicate restricting an injection to particular requests.
/// `param_pointer` is a JSON pointer into the request body, or the special
/// "$path" for the resolved REST path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub param_pointer: String,
    pub equals: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceInjection {
    pub node_selector: NodeSelector,
    pub method: String,
    pub action: InjectionAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<Trigger>,
}

impl DivergenceInjection {
    pub fn triggered(&self, request_body: &Value, request_path: Option<&str>) -> bool {
        match &self.trigger {
            None => true,
            Some(trigger) if trigger.param_pointer == "$path" => {
                request_path.map(Value::from) == Some(trigger.equals.clone())
            }
            Some(trigger) => request_body.pointer(&trigger.param_pointer) == Some(&trigger.equals),
        }
    }
}

fn pointer_remove(value: &mut Value, path: &str) -> bool {
    let Some((parent_path, key)) = path.rsplit_once('/') else { return false };
    let parent = if parent_path.is_empty() {
        Some(&mut *value)
    } else {
        value.pointer_mut(parent_path)
    };
    match parent {
        Some(Value::Object(obj)) => obj.shift_remove(key).is_some(),
        Some(Value::Array(items)) => match key.parse::<usize>() {
            Ok(index) if index < items.len() => {
                items.remove(index);
                true
            }
            _ => false,
        },
        _ => false,
    }
}

fn pointer_insert(value: &mut Value, path: &str, new_value: Value) -> bool {
    let Some((parent_path, key)) = path.rsplit_once('/') else { return false };
    let parent = if parent_path.is_empty() {
        Some(&mut *value)
    } else {
        value.pointer_mut(parent_path)
    };
    match parent {
        Some(Value::Object(obj)) => {
            obj.insert(key.to_string(), new_value);
            true
        }
        _ => false,
    }
}

fn reformat_value(value: &Value, transform: &str) -> Option<Value> {
    match transform {
        // "0x1a" -> "0x01a": padded but numerically identical.
        "hex_pad" => {
            let text = value.as_str()?;
            let digits = text.strip_prefix("0x")?;
            Some(Value::String(format!("0x0{digits}")))
        }
        "hex_upper" => {
            let text = value.as_str()?;
            let digits = text.strip_prefix("0x")?;
            Some(Value::String(format!("0x{}", digits.to_ascii_uppercase())))
        }
        // 7 -> "7": same number as a decimal string.
        "decimal_string" => {
            let n = value.as_u64()?;
            Some(Value::String(n.to_string()))
        }
        _ => None,
    }
}

/// Outcome of applying one node's injections to a canonical response.
#[derive(Debug, Clone)]
pub struct InjectedResponse {
    pub status: u16,
    pub body: Value,
    pub delay_ms: u64,
}

/// Applies every matching injection in order. Injections whose path does
/// not resolve in this particular response are no-ops, so e.g. a
/// result-field injection leaves error responses alone.
pub fn apply_injections(
    injections: &[DivergenceInjection],
    endpoint_id: u32,
    label: &str,
    method: &str,
    request_body: &Value,
    request_path: Option<&str>,
    status: u16,
    body: Value,
) -> InjectedResponse {
    let mut response = InjectedResponse { status, body, delay_ms: 0 };
    for injection in injections {
        if injection.method != method
            || !injection.node_selector.matches(endpoint_id, label)
            || !injection.triggered(request_body, request_path)
        {
            continue;
        }
        match &injection.action {
            InjectionAction::DropField { path } => {
                pointer_remove(&mut response.body, path);
            }
            InjectionAction::ExtraField { path, value } => {
                pointer_insert(&mut response.body, path, value.clone());
            }
            InjectionAction::Reformat { path, transform } => {
                if let Some(slot) = response.body.pointer_mut(path) {
                    if let Some(reformatted) = reformat_value(slot, transform) {
                        *slot = reformatted;
                    }
                }
            }
            InjectionAction::WrongValue { path, value } => {
                // Null marks an absent entity; only real values get corrupted.
                if let Some(slot) = response.body.pointer_mut(path) {
                    if !slot.is_null() {
                        *slot = value.clone();
                    }
                }
            }
            InjectionAction::WrongStatus { code } => {
                response.status = *code;
            }
            InjectionAction::ErrorMessage { text } => {
                if let Some(slot) = response.body.pointer_mut("/error/message") {
                    *slot = Value::String(text.clone());
                } else if response.status >= 400 {
                    if let Some(slot) = response.body.pointer_mut("/message") {
                        *slot = Value::String(text.clone());
                    }
                }
            }
            InjectionAction::Stall { ms } => {
                response.delay_ms += ms;
            }
            InjectionAction::CrashMessage { text } => {
                response.status = 500;
                response.body = if request_path.is_none() {
                    serde_json::json!({
                        "jsonrpc": "2.0",
                        "id": request_body.get("id").cloned().unwrap_or(Value::Null),
                        "error": {"code": -32603, "message": text},
                    })
                } else {
                    serde_json::json!({"code": 500, "message": text})
                };
            }
        }
    }
    response
}
