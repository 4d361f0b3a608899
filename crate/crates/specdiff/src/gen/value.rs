//! Schema-driven generation of single JSON values.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{Map, Value};

use crate::spec::{validate_value, SchemaKind, SchemaNode};

use super::pattern::PatternSampler;
use super::GenError;

const MAX_UNCONSTRAINED_STRING: usize = 64;
const MAX_UNCONSTRAINED_ITEMS: usize = 3;

/// Characters sampled for unconstrained strings and injected field names.
/// Printable ASCII plus supplementary-plane characters, so that encoding
/// and escaping paths get exercised.
fn string_pool() -> &'static [char] {
    static POOL: OnceLock<Vec<char>> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut pool: Vec<char> = (0x20u32..=0x7e).filter_map(char::from_u32).collect();
        // Astral characters force surrogate pairs in transports that use
        // UTF-16 escapes.
        pool.extend((0x1f300u32..=0x1f320).filter_map(char::from_u32));
        pool.extend((0x10400u32..=0x1041f).filter_map(char::from_u32));
        pool
    })
}

pub(crate) fn random_string<R: Rng>(rng: &mut R, min_len: usize, max_len: usize) -> String {
    let pool = string_pool();
    let len = rng.gen_range(min_len..=max_len);
    (0..len).map(|_| *pool.choose(rng).expect("pool is non-empty")).collect()
}

/// An arbitrary JSON value with bounded depth, for `any`-typed schemas and
/// injected junk.
pub(crate) fn random_any_value<R: Rng>(rng: &mut R, depth: u32) -> Value {
    let top = if depth == 0 { 4 } else { 6 };
    match rng.gen_range(0..top) {
        0 => Value::Null,
        1 => Value::Bool(rng.gen()),
        2 => Value::from(rng.gen_range(-1_000_000i64..=1_000_000)),
        3 => Value::String(random_string(rng, 0, 12)),
        4 => {
            let len = rng.gen_range(0..=MAX_UNCONSTRAINED_ITEMS);
            Value::Array((0..len).map(|_| random_any_value(rng, depth - 1)).collect())
        }
        _ => {
            let len = rng.gen_range(0..=MAX_UNCONSTRAINED_ITEMS);
            let mut obj = Map::new();
            for _ in 0..len {
                obj.insert(random_string(rng, 1, 8), random_any_value(rng, depth - 1));
            }
            Value::Object(obj)
        }
    }
}

/// Generates a value satisfying `schema`. The output always passes
/// [`validate_value`]; constructs the generator cannot satisfy fail loudly.
pub fn gen_valid_value<R: Rng>(schema: &SchemaNode, rng: &mut R) -> Result<Value, GenError> {
    let mut notes = Vec::new();
    gen_value_noted(schema, rng, "", &mut notes)
}

/// Like [`gen_valid_value`] but records choices (anyOf branch picks) into
/// `notes` for request provenance.
pub(crate) fn gen_value_noted<R: Rng>(
    schema: &SchemaNode,
    rng: &mut R,
    ctx: &str,
    notes: &mut Vec<String>,
) -> Result<Value, GenError> {
    if let Some(allowed) = &schema.enum_values {
        // The enum is authoritative; other constraints may narrow it.
        let satisfying: Vec<&Value> =
            allowed.iter().filter(|v| validate_value(schema, v)).collect();
        let Some(choice) = satisfying.choose(rng) else {
            return Err(GenError::Unsatisfiable {
                detail: format!("no enum value satisfies the schema{ctx}"),
            });
        };
        return Ok((*choice).clone());
    }
    if let Some(branches) = &schema.any_of {
        if branches.is_empty() {
            return Err(GenError::Unsatisfiable { detail: format!("empty anyOf{ctx}") });
        }
        let index = rng.gen_range(0..branches.len());
        notes.push(format!("anyOf branch {index}{ctx}"));
        return gen_value_noted(&branches[index], rng, ctx, notes);
    }
    match schema.kind {
        SchemaKind::Any => Ok(random_any_value(rng, 2)),
        SchemaKind::Null => Ok(Value::Null),
        SchemaKind::Boolean => Ok(Value::Bool(rng.gen())),
        SchemaKind::Integer => Ok(Value::from(rng.gen_range(-2_147_483_648i64..=2_147_483_647))),
        SchemaKind::Number => {
            Ok(Value::from(rng.gen_range(-1_000_000_000i64..=1_000_000_000) as f64 / 1000.0))
        }
        SchemaKind::String => match &schema.pattern {
            Some(pattern) => {
                let sampler = PatternSampler::compile(pattern)?;
                Ok(Value::String(sampler.sample(rng)))
            }
            None => Ok(Value::String(random_string(rng, 0, MAX_UNCONSTRAINED_STRING))),
        },
        SchemaKind::Array => {
            let min = schema.min_items.unwrap_or(0);
            let max = schema
                .max_items
                .unwrap_or_else(|| min.saturating_add(MAX_UNCONSTRAINED_ITEMS));
            let len = rng.gen_range(min..=max);
            let item_schema =
                schema.items.as_deref().cloned().unwrap_or_else(SchemaNode::any);
            let mut items = Vec::with_capacity(len);
            for index in 0..len {
                items.push(gen_value_noted(
                    &item_schema,
                    rng,
                    &format!("{ctx}[{index}]"),
                    notes,
                )?);
            }
            Ok(Value::Array(items))
        }
        SchemaKind::Object => {
            let mut obj = Map::new();
            if let Some(properties) = &schema.properties {
                let required: Vec<&String> =
                    schema.required.iter().flatten().collect();
                for (name, child) in properties {
                    let include = required.contains(&name) || rng.gen_bool(0.5);
                    if include {
                        obj.insert(
                            name.clone(),
                            gen_value_noted(child, rng, &format!("{ctx}.{name}"), notes)?,
                        );
                    }
                }
            }
            Ok(Value::Object(obj))
        }
    }
}
