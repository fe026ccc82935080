use std::fmt::Write;

use super::value::{Array, Bindings, IntSet, Value};

fn float(x: f64, out: &mut String) {
    if x.is_infinite() {
        out.push_str(if x > 0.0 { "infinity" } else { "-infinity" });
    } else {
        // `{:?}` is the shortest round-tripping form and always keeps a `.`
        let _ = write!(out, "{x:?}");
    }
}

fn string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn set(s: &IntSet, out: &mut String) {
    match s.as_range() {
        Some((lo, hi)) if hi > lo => {
            let _ = write!(out, "{lo}..{hi}");
        }
        _ => {
            out.push('{');
            for (i, m) in s.members().iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{m}");
            }
            out.push('}');
        }
    }
}

fn list(items: &[Value], out: &mut String) {
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        value(v, out);
    }
}

fn array(a: &Array, out: &mut String) {
    let dims = a.dims();
    let one_based = dims.iter().all(|d| d.is_one_based());
    match dims.len() {
        1 if one_based => {
            out.push('[');
            list(a.elements(), out);
            out.push(']');
        }
        2 if one_based && !a.elements().is_empty() => {
            let cols = dims[1].extent();
            out.push_str("[|");
            for (r, row) in a.elements().chunks(cols).enumerate() {
                out.push_str(if r == 0 { " " } else { " | " });
                list(row, out);
            }
            out.push_str(" |]");
        }
        n => {
            let _ = write!(out, "array{n}d(");
            for d in dims {
                if d.extent() == 0 {
                    out.push_str("{}, ");
                } else {
                    let _ = write!(out, "{d}, ");
                }
            }
            out.push('[');
            list(a.elements(), out);
            out.push_str("])");
        }
    }
}

fn value(v: &Value, out: &mut String) {
    match v {
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(x) => float(*x, out),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Str(s) => string(s, out),
        Value::Set(s) => set(s, out),
        Value::Array(a) => array(a, out),
    }
}

/// Renders a single value in DZN syntax.
pub fn value_to_dzn(v: &Value) -> String {
    let mut out = String::new();
    value(v, &mut out);
    out
}

/// Renders bindings as DZN text, one `name = value;` item per line.
pub fn serialize(bindings: &Bindings) -> String {
    let mut out = String::new();
    for (name, v) in bindings.iter() {
        out.push_str(name);
        out.push_str(" = ");
        value(v, &mut out);
        out.push_str(";\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dzn::{parse_dzn, IndexRange};

    #[test]
    fn empty_bindings_serialize_to_nothing() {
        assert_eq!(serialize(&Bindings::new()), "");
    }

    #[test]
    fn single_scalar() {
        let mut b = Bindings::new();
        b.insert("n", Value::Int(3));
        assert_eq!(serialize(&b), "n = 3;\n");
    }

    #[test]
    fn shapes() {
        let m = Array::new(
            vec![IndexRange::one_based(2), IndexRange::one_based(2)],
            (1..=4).map(Value::Int).collect(),
        )
        .unwrap();
        assert_eq!(value_to_dzn(&m.into()), "[| 1, 2 | 3, 4 |]");
        let z = Array::new(vec![IndexRange::new(0, 1)], vec![Value::Int(7), Value::Int(8)]).unwrap();
        assert_eq!(value_to_dzn(&z.into()), "array1d(0..1, [7, 8])");
        let e = Array::new(vec![IndexRange::one_based(0), IndexRange::one_based(3)], vec![]).unwrap();
        assert_eq!(value_to_dzn(&e.into()), "array2d({}, 1..3, [])");
    }

    #[test]
    fn scalars() {
        assert_eq!(value_to_dzn(&Value::Float(1.0)), "1.0");
        assert_eq!(value_to_dzn(&Value::Float(f64::NEG_INFINITY)), "-infinity");
        assert_eq!(value_to_dzn(&Value::Set(IntSet::from_members([3]))), "{3}");
        assert_eq!(value_to_dzn(&Value::Set(IntSet::from_range(2, 5))), "2..5");
        assert_eq!(value_to_dzn(&Value::Str("a\"b".into())), "\"a\\\"b\"");
    }

    #[test]
    fn round_trips_through_parser() {
        let text =
            "a = -1;\nb = [| 1.5, 2.0 | 3.0, -4.25 |];\nc = array3d(1..2, 0..0, 1..1, [true, false]);\nd = {1, 3};\n";
        let b = parse_dzn(text).unwrap();
        assert_eq!(serialize(&b), text);
    }
}
