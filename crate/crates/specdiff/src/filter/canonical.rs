//! Deterministic equivalence tier: values that differ only in encoding.

use serde_json::Value;

use crate::spec::SchemaNode;

fn is_hex_string(text: &str) -> bool {
    text.strip_prefix("0x")
        .map(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_hexdigit()))
        .unwrap_or(false)
}

/// Quantity-typed hex strings compare by integer value; the schema's title
/// or pattern tells quantities apart from fixed-width data like hashes.
fn is_quantity_schema(schema: Option<&SchemaNode>) -> bool {
    let Some(schema) = schema else { return false };
    if let Some(title) = &schema.title {
        let title = title.to_ascii_lowercase();
        if title.contains("unsigned integer") || title.contains("quantity") {
            return true;
        }
    }
    schema.pattern.as_deref() == Some("^0x(0|[1-9a-f][0-9a-f]*)$")
}

/// Strips the prefix and leading zeros, lowercases.
fn normalize_quantity(text: &str) -> String {
    let digits = text.trim_start_matches("0x").trim_start_matches('0');
    if digits.is_empty() {
        "0".to_string()
    } else {
        digits.to_ascii_lowercase()
    }
}

/// True iff `a` and `b` are equal after canonicalization: hex strings
/// compare case-insensitively, quantity hex by integer value, decimal
/// integer strings numerically, containers recursively, everything else by
/// deep structural equality.
pub fn canonical_equivalent(a: &Value, b: &Value, schema: Option<&SchemaNode>) -> bool {
    if a == b {
        return true;
    }
    match (a, b) {
        (Value::String(sa), Value::String(sb)) => {
            if is_hex_string(sa) && is_hex_string(sb) {
                if is_quantity_schema(schema) {
                    return normalize_quantity(sa) == normalize_quantity(sb);
                }
                return sa.eq_ignore_ascii_case(sb);
            }
            match (sa.parse::<i128>(), sb.parse::<i128>()) {
                (Ok(na), Ok(nb)) => na == nb,
                _ => false,
            }
        }
        (Value::Number(na), Value::Number(nb)) => match (na.as_i64(), nb.as_i64()) {
            (Some(ia), Some(ib)) => ia == ib,
            _ => na.as_f64() == nb.as_f64(),
        },
        (Value::Array(xa), Value::Array(xb)) => {
            if xa.len() != xb.len() {
                return false;
            }
            let item_schema = schema.and_then(|s| s.items.as_deref());
            xa.iter().zip(xb).all(|(ia, ib)| canonical_equivalent(ia, ib, item_schema))
        }
        (Value::Object(oa), Value::Object(ob)) => {
            if oa.len() != ob.len() {
                return false;
            }
            oa.iter().all(|(key, va)| match ob.get(key) {
                Some(vb) => {
                    let child = schema
                        .and_then(|s| s.properties.as_ref())
                        .and_then(|props| props.get(key));
                    canonical_equivalent(va, vb, child)
                }
                None => false,
            })
        }
        _ => false,
    }
}
