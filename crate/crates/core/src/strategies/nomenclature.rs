use crate::corpus::ProblemInstance;
use crate::dzn::{parse_dzn, value_to_dzn, Value};

const EXAMPLE_ELEMENTS: usize = 5;

/// One `symbol (shape): definition` line per parameter, each followed by an
/// example value taken from the instance data when it has one.
pub fn data_nomenclature(inst: &ProblemInstance) -> String {
    let data = parse_dzn(&inst.data_text).unwrap_or_default();
    let mut out = String::new();
    for p in &inst.input.parameters {
        let shape = if p.shape.is_empty() {
            "scalar".to_string()
        } else {
            p.shape.join(", ")
        };
        out.push_str(&format!("{} ({shape}): {}\n", p.symbol, p.definition.trim()));
        if let Some(v) = data.get(&p.symbol) {
            out.push_str(&format!("  Example: {}\n", example(v)));
        }
    }
    if out.is_empty() {
        out.push_str("(no input data)\n");
    }
    out.truncate(out.trim_end().len());
    out
}

fn example(v: &Value) -> String {
    match v {
        Value::Array(a) if a.elements().len() > EXAMPLE_ELEMENTS => {
            let head: Vec<String> = a.elements()[..EXAMPLE_ELEMENTS].iter().map(value_to_dzn).collect();
            format!("[{}, ...]", head.join(", "))
        }
        Value::Array(a) => {
            let all: Vec<String> = a.elements().iter().map(value_to_dzn).collect();
            format!("[{}]", all.join(", "))
        }
        other => value_to_dzn(other),
    }
}
