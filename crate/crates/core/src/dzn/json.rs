//! JSON view of DZN values, used by `output.json` and the HTTP API.
//!
//! Arrays become nested lists in row-major order (index ranges are not
//! recorded); integer sets become `{"set": [..]}`.

use serde_json::{json, Map, Number, Value as Json};

use super::value::{Array, Bindings, IndexRange, IntSet, Value};

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Int(i) => Json::from(*i),
        Value::Float(x) => Number::from_f64(*x).map(Json::Number).unwrap_or_else(|| {
            Json::String(if *x > 0.0 {
                "infinity".into()
            } else {
                "-infinity".into()
            })
        }),
        Value::Bool(b) => Json::Bool(*b),
        Value::Str(s) => Json::String(s.clone()),
        Value::Set(s) => json!({ "set": s.members() }),
        Value::Array(a) => nest(a.elements(), &a.extents()),
    }
}

fn nest(elements: &[Value], extents: &[usize]) -> Json {
    match extents {
        [] | [_] => Json::Array(elements.iter().map(value_to_json).collect()),
        [_, rest @ ..] => {
            let stride: usize = rest.iter().product();
            if stride == 0 {
                return Json::Array(vec![]);
            }
            Json::Array(elements.chunks(stride).map(|c| nest(c, rest)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot convert JSON to a data value: {0}")]
pub struct JsonValueError(pub String);

pub fn value_from_json(j: &Json) -> Result<Value, JsonValueError> {
    match j {
        Json::Bool(b) => Ok(Value::Bool(*b)),
        Json::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Value::Int(i))
            } else {
                n.as_f64()
                    .map(Value::Float)
                    .ok_or_else(|| JsonValueError(format!("number {n} out of range")))
            }
        }
        Json::String(s) => Ok(Value::Str(s.clone())),
        Json::Object(o) => match o.get("set") {
            Some(Json::Array(items)) if o.len() == 1 => items
                .iter()
                .map(|m| {
                    m.as_i64()
                        .ok_or_else(|| JsonValueError(format!("set member {m} is not an integer")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(|ms| Value::Set(IntSet::from_members(ms))),
            _ => Err(JsonValueError("objects must have the form {\"set\": [...]}".into())),
        },
        Json::Null => Err(JsonValueError("null".into())),
        Json::Array(_) => {
            let mut extents = Vec::new();
            let mut flat = Vec::new();
            flatten(j, 0, &mut extents, &mut flat)?;
            let dims = extents.into_iter().map(IndexRange::one_based).collect();
            Array::new(dims, flat)
                .map(Value::Array)
                .map_err(|e| JsonValueError(e.to_string()))
        }
    }
}

fn flatten(j: &Json, depth: usize, extents: &mut Vec<usize>, flat: &mut Vec<Value>) -> Result<(), JsonValueError> {
    match j {
        Json::Array(items) => {
            if depth == extents.len() {
                extents.push(items.len());
            } else if extents[depth] != items.len() {
                return Err(JsonValueError("ragged nested list".into()));
            }
            for item in items {
                flatten(item, depth + 1, extents, flat)?;
            }
            Ok(())
        }
        scalar => {
            if depth != extents.len() {
                return Err(JsonValueError("ragged nested list".into()));
            }
            flat.push(value_from_json(scalar)?);
            Ok(())
        }
    }
}

pub fn bindings_to_json(b: &Bindings) -> Map<String, Json> {
    b.iter().map(|(k, v)| (k.to_string(), value_to_json(v))).collect()
}

pub fn bindings_from_json(m: &Map<String, Json>) -> Result<Bindings, JsonValueError> {
    m.iter()
        .map(|(k, v)| {
            value_from_json(v)
                .map(|v| (k.clone(), v))
                .map_err(|e| JsonValueError(format!("{k}: {}", e.0)))
        })
        .collect()
}

/// `#[serde(with = ...)]` adapter storing bindings as a JSON object.
pub mod bindings_serde {
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::{Map, Value as Json};

    use super::{bindings_from_json, bindings_to_json};
    use crate::dzn::Bindings;

    pub fn serialize<S: Serializer>(b: &Bindings, s: S) -> Result<S::Ok, S::Error> {
        bindings_to_json(b).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Bindings, D::Error> {
        let m = Map::<String, Json>::deserialize(d)?;
        bindings_from_json(&m).map_err(D::Error::custom)
    }
}
