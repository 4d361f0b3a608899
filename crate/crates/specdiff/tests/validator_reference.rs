//! The schema validator against a brute-force reference: 1,000 randomized
//! (schema, value) pairs with schema depth <= 4 must agree exactly.
//!
//! The reference validator below is written as its own error-collecting
//! recursion, independent of the implementation path it checks.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use specdiff::gen::gen_valid_value;
use specdiff::spec::{validate_value, SchemaKind, SchemaNode};
use specdiff::util::seeded_rng;

const PATTERN_POOL: &[&str] = &[
    "^0x[0-9a-fA-F]{40}$",
    "^0x(0|[1-9a-f][0-9a-f]*)$",
    "^0x[0-9a-f]{64}$",
    "^[0-9]{1,6}$",
    "^(on|off)$",
];

fn random_schema<R: Rng>(rng: &mut R, depth: u32) -> SchemaNode {
    if depth > 0 && rng.gen_bool(0.15) {
        let mut node = SchemaNode::any();
        let branches = (0..rng.gen_range(1..=3)).map(|_| random_schema(rng, depth - 1)).collect();
        node.any_of = Some(branches);
        return node;
    }
    let kind = if depth == 0 {
        *[SchemaKind::String, SchemaKind::Integer, SchemaKind::Boolean, SchemaKind::Null, SchemaKind::Any]
            .choose(rng)
            .unwrap()
    } else {
        *[
            SchemaKind::String,
            SchemaKind::Integer,
            SchemaKind::Number,
            SchemaKind::Boolean,
            SchemaKind::Null,
            SchemaKind::Any,
            SchemaKind::Array,
            SchemaKind::Object,
        ]
        .choose(rng)
        .unwrap()
    };
    let mut node = SchemaNode::of_kind(kind);
    match kind {
        SchemaKind::String => {
            if rng.gen_bool(0.5) {
                node.pattern = Some((*PATTERN_POOL.choose(rng).unwrap()).to_string());
            }
            if rng.gen_bool(0.2) {
                node.enum_values =
                    Some(vec![json!("latest"), json!("earliest"), json!("pending")]);
            }
        }
        SchemaKind::Array => {
            node.items = Some(Box::new(random_schema(rng, depth - 1)));
            if rng.gen_bool(0.5) {
                let min = rng.gen_range(0..3usize);
                node.min_items = Some(min);
                node.max_items = Some(min + rng.gen_range(0..3usize));
            }
        }
        SchemaKind::Object => {
            let mut properties = IndexMap::new();
            let count = rng.gen_range(0..4);
            for index in 0..count {
                properties.insert(format!("f{index}"), random_schema(rng, depth - 1));
            }
            let required: Vec<String> = properties
                .keys()
                .filter(|_| rng.gen_bool(0.5))
                .cloned()
                .collect();
            node.required = (!required.is_empty()).then_some(required);
            node.properties = Some(properties);
            node.additional_properties_allowed = rng.gen_bool(0.7);
        }
        SchemaKind::Integer => {
            if rng.gen_bool(0.2) {
                node.enum_values = Some(vec![json!(0), json!(1), json!(64)]);
            }
        }
        _ => {}
    }
    node
}

fn random_junk<R: Rng>(rng: &mut R, depth: u32) -> Value {
    let top = if depth == 0 { 5 } else { 7 };
    match rng.gen_range(0..top) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::from(rng.gen_range(-100i64..100)),
        3 => Value::String(
            ["", "latest", "0x0", "0x1a", "0xZZ", "64", "banana"]
                .choose(rng)
                .unwrap()
                .to_string(),
        ),
        4 => Value::from(rng.gen_range(-5.0f64..5.0)),
        5 => {
            let len = rng.gen_range(0..4);
            Value::Array((0..len).map(|_| random_junk(rng, depth - 1)).collect())
        }
        _ => {
            let len = rng.gen_range(0..4);
            let mut obj = serde_json::Map::new();
            for index in 0..len {
                if rng.gen_bool(0.7) {
                    obj.insert(format!("f{index}"), random_junk(rng, depth - 1));
                } else {
                    obj.insert(format!("x{index}"), random_junk(rng, depth - 1));
                }
            }
            Value::Object(obj)
        }
    }
}

/// Brute-force constraint check, collecting every violation.
fn reference_validate(schema: &SchemaNode, value: &Value) -> bool {
    violations(schema, value).is_empty()
}

fn violations(schema: &SchemaNode, value: &Value) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(branches) = &schema.any_of {
        let satisfied = branches.iter().any(|branch| violations(branch, value).is_empty());
        if !satisfied {
            out.push("no anyOf branch satisfied".to_string());
        }
    }
    if let Some(allowed) = &schema.enum_values {
        if !allowed.iter().any(|candidate| candidate == value) {
            out.push("value not in enum".to_string());
        }
    }
    let type_ok = match schema.kind {
        SchemaKind::Any => true,
        SchemaKind::Null => matches!(value, Value::Null),
        SchemaKind::Boolean => matches!(value, Value::Bool(_)),
        SchemaKind::Integer => match value {
            Value::Number(n) => n.is_i64() || n.is_u64(),
            _ => false,
        },
        SchemaKind::Number => matches!(value, Value::Number(_)),
        SchemaKind::String => matches!(value, Value::String(_)),
        SchemaKind::Array => matches!(value, Value::Array(_)),
        SchemaKind::Object => matches!(value, Value::Object(_)),
    };
    if !type_ok {
        out.push("type mismatch".to_string());
        return out;
    }
    match (schema.kind, value) {
        (SchemaKind::String, Value::String(text)) => {
            if let Some(pattern) = &schema.pattern {
                let re = regex::Regex::new(pattern).expect("pool patterns compile");
                if !re.is_match(text) {
                    out.push("pattern violated".to_string());
                }
            }
        }
        (SchemaKind::Array, Value::Array(items)) => {
            if let Some(min) = schema.min_items {
                if items.len() < min {
                    out.push("too few items".to_string());
                }
            }
            if let Some(max) = schema.max_items {
                if items.len() > max {
                    out.push("too many items".to_string());
                }
            }
            if let Some(item_schema) = &schema.items {
                for item in items {
                    out.extend(violations(item_schema, item));
                }
            }
        }
        (SchemaKind::Object, Value::Object(fields)) => {
            for name in schema.required.iter().flatten() {
                if !fields.contains_key(name) {
                    out.push(format!("missing required {name}"));
                }
            }
            for (name, field_value) in fields {
                match schema.properties.as_ref().and_then(|p| p.get(name)) {
                    Some(field_schema) => out.extend(violations(field_schema, field_value)),
                    None if !schema.additional_properties_allowed => {
                        out.push(format!("additional property {name}"));
                    }
                    None => {}
                }
            }
        }
        _ => {}
    }
    out
}

#[test]
fn validator_agrees_with_the_reference_on_randomized_pairs() {
    let mut rng = seeded_rng(1234);
    let mut agreements_true = 0u32;
    let mut agreements_false = 0u32;
    for round in 0..1_000 {
        let schema = random_schema(&mut rng, 4);
        // Half conforming values from the generator, half arbitrary junk,
        // so both verdicts are exercised.
        let value = if rng.gen_bool(0.5) {
            match gen_valid_value(&schema, &mut rng) {
                Ok(value) => value,
                Err(_) => random_junk(&mut rng, 4),
            }
        } else {
            random_junk(&mut rng, 4)
        };
        let observed = validate_value(&schema, &value);
        let expected = reference_validate(&schema, &value);
        assert_eq!(
            observed, expected,
            "round {round}: validators disagree on value {value} against {schema:#?}"
        );
        if observed {
            agreements_true += 1;
        } else {
            agreements_false += 1;
        }
    }
    assert!(agreements_true > 100, "conforming side underexercised: {agreements_true}");
    assert!(agreements_false > 100, "violating side underexercised: {agreements_false}");
}
