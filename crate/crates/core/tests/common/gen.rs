use proptest::collection::vec;
use proptest::prelude::*;
use zincpilot_core::dzn::{Array, Bindings, IndexRange, IntSet, Value};

fn identifier() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,8}"
}

fn finite_float() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1.0e6..1.0e6f64,
        Just(0.5),
        Just(f64::INFINITY),
        Just(f64::NEG_INFINITY),
    ]
}

fn int_set() -> impl Strategy<Value = IntSet> {
    prop_oneof![
        vec(-50i64..50, 0..6).prop_map(IntSet::from_members),
        (-20i64..20, 0i64..6).prop_map(|(lo, n)| IntSet::from_range(lo, lo + n)),
    ]
}

pub fn scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i64>().prop_map(Value::Int),
        (-100i64..100).prop_map(Value::Int),
        finite_float().prop_map(Value::Float),
        any::<bool>().prop_map(Value::Bool),
        any::<String>().prop_map(Value::Str),
        int_set().prop_map(Value::Set),
    ]
}

fn homogeneous_elements(n: usize) -> impl Strategy<Value = Vec<Value>> {
    prop_oneof![
        vec((-1000i64..1000).prop_map(Value::Int), n),
        vec(finite_float().prop_map(Value::Float), n),
        vec(any::<bool>().prop_map(Value::Bool), n),
        vec("[a-z \"\\\\]{0,4}".prop_map(Value::Str), n),
        vec(int_set().prop_map(Value::Set), n),
    ]
}

/// Index range for one dimension. Empty ranges are always `1..0`, since a
/// data file cannot carry the bounds of an empty dimension.
fn range() -> impl Strategy<Value = IndexRange> {
    prop_oneof![
        3 => (0usize..4).prop_map(IndexRange::one_based),
        1 => (-3i64..3, 1i64..4).prop_map(|(lo, n)| IndexRange::new(lo, lo + n - 1)),
    ]
}

pub fn array() -> impl Strategy<Value = Value> {
    vec(range(), 1..4).prop_flat_map(|dims| {
        let n: usize = dims.iter().map(IndexRange::extent).product();
        homogeneous_elements(n).prop_map(move |els| Value::Array(Array::new(dims.clone(), els).unwrap()))
    })
}

pub fn value() -> impl Strategy<Value = Value> {
    prop_oneof![2 => scalar(), 1 => array()]
}

pub fn bindings() -> impl Strategy<Value = Bindings> {
    vec((identifier(), value()), 0..6).prop_map(|pairs| {
        let mut b = Bindings::new();
        for (k, v) in pairs {
            if !b.contains(&k) {
                b.insert(k, v);
            }
        }
        b
    })
}

pub mod corpus {
    use indexmap::IndexMap;
    use proptest::collection::vec;
    use proptest::prelude::*;
    use serde_json::{json, Value as Json};
    use zincpilot_core::corpus::{ExpectedOutput, Metadata, Objective, ProblemInput, ProblemInstance, SymbolSpec};

    fn symbol_specs() -> impl Strategy<Value = Vec<SymbolSpec>> {
        vec(
            ("[A-Za-z_][A-Za-z0-9_]{0,6}", ".{0,30}", vec("[A-Z]{1,3}|[1-9]", 0..3)),
            0..5,
        )
        .prop_map(|items| {
            let mut seen = std::collections::HashSet::new();
            items
                .into_iter()
                .filter(|(s, _, _)| seen.insert(s.clone()))
                .map(|(symbol, definition, shape)| SymbolSpec {
                    definition,
                    symbol,
                    shape,
                })
                .collect()
        })
    }

    fn json_leaf() -> impl Strategy<Value = Json> {
        prop_oneof![
            any::<i64>().prop_map(Json::from),
            (-1.0e9..1.0e9f64).prop_map(Json::from),
            any::<bool>().prop_map(Json::from),
            "[a-z]{0,5}".prop_map(Json::from),
        ]
    }

    fn extras(reserved: &'static [&'static str]) -> impl Strategy<Value = IndexMap<String, Json>> {
        vec(("x_[a-z]{1,5}", json_leaf()), 0..3).prop_map(move |kv| {
            kv.into_iter()
                .filter(|(k, _)| !reserved.contains(&k.as_str()))
                .collect()
        })
    }

    fn objective() -> impl Strategy<Value = Objective> {
        prop_oneof![
            Just(Objective::Satisfy),
            Just(Objective::Maximize),
            Just(Objective::Minimize)
        ]
    }

    pub fn instance() -> impl Strategy<Value = ProblemInstance> {
        (
            (
                ".{0,60}",
                symbol_specs(),
                symbol_specs(),
                "[a-z]{1,8}_[0-9]{1,3}",
                ".{0,20}",
                ".{0,10}",
            ),
            (
                proptest::option::of("[a-z ]{0,10}"),
                objective(),
                vec("[a-z_]{1,10}", 0..4),
                extras(&[]),
            ),
            (".{0,80}", proptest::option::of(".{1,80}"), any::<bool>(), extras(&[])),
            (
                any::<bool>(),
                -1.0e12..1.0e12f64,
                vec(("[a-z]{1,4}", json_leaf()), 1..4),
                any::<bool>(),
            ),
        )
            .prop_map(|(a, b, c, d)| {
                let (description, parameters, output, identifier, title, domain) = a;
                let (subdomain, objective, keywords, meta_extra) = b;
                let (data_text, model, verified, extra) = c;
                let (has_output, obj_value, vars, unsat) = d;
                let ground_truth_model = match objective {
                    Objective::Satisfy => Some(model.unwrap_or_else(|| "solve satisfy;\n".into())),
                    _ => model,
                };
                let expected_output = has_output.then(|| ExpectedOutput {
                    objective_value: (objective != Objective::Satisfy).then_some(obj_value),
                    variable_values: vars.into_iter().collect(),
                    unsatisfiable: unsat,
                });
                ProblemInstance {
                    input: ProblemInput {
                        description,
                        parameters,
                        output,
                        metadata: Metadata {
                            title,
                            identifier,
                            domain,
                            subdomain,
                            objective,
                            keywords,
                            extra: meta_extra,
                        },
                    },
                    data_text,
                    ground_truth_model,
                    expected_output,
                    verified,
                    extra,
                }
            })
    }

    pub fn sample_input_json() -> Json {
        json!({
            "description": "A firm sells M products.",
            "parameters": [{"definition": "Number of products", "symbol": "M", "shape": []}],
            "output": [],
            "metadata": {
                "title": "Revenue", "identifier": "nlp4lp_1", "domain": "Economics",
                "objective": "maximize", "keywords": ["<="]
            }
        })
    }
}
