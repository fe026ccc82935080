mod common;

use std::fs;

use proptest::prelude::*;
use serde_json::json;
use zincpilot_core::corpus::{cross_validate, load_problem, save_problem, Corpus, CorpusError, Finding, Objective};

use common::gen::corpus::{instance, sample_input_json};

fn write_input(dir: &std::path::Path, j: &serde_json::Value) {
    fs::write(dir.join("input.json"), serde_json::to_string_pretty(j).unwrap()).unwrap();
}

#[test]
fn loads_maximize_instance_with_scalar_parameter() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), &sample_input_json());
    let inst = load_problem(dir.path()).unwrap();
    assert_eq!(inst.objective(), Objective::Maximize);
    assert_eq!(inst.input.parameters.len(), 1);
    assert!(inst.input.parameters[0].shape.is_empty());
    // no data.dzn is a supported case
    assert_eq!(inst.data_text, "");
    assert!(!inst.verified);
    assert_eq!(inst.source(), "nlp4lp");
}

#[test]
fn rejects_unknown_objective() {
    let dir = tempfile::tempdir().unwrap();
    let mut j = sample_input_json();
    j["metadata"]["objective"] = json!("optimize");
    write_input(dir.path(), &j);
    assert!(matches!(load_problem(dir.path()), Err(CorpusError::InvalidObjective(o)) if o == "optimize"));
}

#[test]
fn missing_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_problem(dir.path()), Err(CorpusError::MissingInput(_))));
    fs::write(dir.path().join("input.json"), "{ not json").unwrap();
    assert!(matches!(
        load_problem(dir.path()),
        Err(CorpusError::MalformedInput { .. })
    ));
    let mut j = sample_input_json();
    j["parameters"] = json!([{"definition": "", "symbol": "2x", "shape": []}]);
    write_input(dir.path(), &j);
    assert!(matches!(
        load_problem(dir.path()),
        Err(CorpusError::MalformedInput { .. })
    ));
}

#[test]
fn satisfaction_without_verifier_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut j = sample_input_json();
    j["metadata"]["objective"] = json!("satisfy");
    write_input(dir.path(), &j);
    assert!(matches!(
        load_problem(dir.path()),
        Err(CorpusError::MissingVerifierModel(_))
    ));
    fs::write(dir.path().join("model.mzn"), "var 1..3: x;\nsolve satisfy;\n").unwrap();
    assert!(load_problem(dir.path()).is_ok());
}

#[test]
fn unknown_keys_and_raw_texts_survive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut j = sample_input_json();
    j["metadata"]["source_url"] = json!("https://example.org/p1");
    j["curation_notes"] = json!({"reviewer": 2});
    write_input(dir.path(), &j);
    let data = "% comment kept\nM = 4;\r\n";
    fs::write(dir.path().join("data.dzn"), data).unwrap();
    let mut inst = load_problem(dir.path()).unwrap();
    inst.verified = true;
    let out = tempfile::tempdir().unwrap();
    save_problem(&inst, out.path()).unwrap();
    assert_eq!(fs::read_to_string(out.path().join("data.dzn")).unwrap(), data);
    let back = load_problem(out.path()).unwrap();
    assert_eq!(back, inst);
    assert!(back.verified);
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("input.json")).unwrap()).unwrap();
    assert_eq!(saved["metadata"]["source_url"], json!("https://example.org/p1"));
    assert_eq!(saved["curation_notes"], json!({"reviewer": 2}));
}

#[test]
fn duplicate_symbols_rejected_before_write() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), &sample_input_json());
    let mut inst = load_problem(dir.path()).unwrap();
    let p = inst.input.parameters[0].clone();
    inst.input.parameters.push(p);
    let out = tempfile::tempdir().unwrap();
    let target = out.path().join("inst");
    assert!(matches!(save_problem(&inst, &target), Err(CorpusError::Invalid(_))));
    assert!(!target.exists());
}

#[test]
fn cross_validation_findings() {
    let dir = tempfile::tempdir().unwrap();
    let mut j = sample_input_json();
    j["parameters"] = json!([
        {"definition": "", "symbol": "M", "shape": []},
        {"definition": "", "symbol": "Prices", "shape": ["M"]}
    ]);
    write_input(dir.path(), &j);
    fs::write(dir.path().join("data.dzn"), "M = 4;").unwrap();
    let inst = load_problem(dir.path()).unwrap();
    assert_eq!(
        cross_validate(&inst).unwrap(),
        vec![Finding::MissingSymbol {
            symbol: "Prices".into()
        }]
    );
}

#[test]
fn corpus_index_and_scan() {
    let root = tempfile::tempdir().unwrap();
    for id in ["b_2", "a_1"] {
        let d = root.path().join(id);
        fs::create_dir(&d).unwrap();
        let mut j = sample_input_json();
        j["metadata"]["identifier"] = json!(id);
        write_input(&d, &j);
    }
    let corpus = Corpus::open(root.path()).unwrap();
    assert_eq!(corpus.ids().collect::<Vec<_>>(), ["a_1", "b_2"]);
    corpus.write_index().unwrap();
    let reopened = Corpus::open(root.path()).unwrap();
    assert_eq!(reopened.entries(), corpus.entries());
    assert_eq!(reopened.load("b_2").unwrap().id(), "b_2");
    assert!(matches!(reopened.load("zzz"), Err(CorpusError::UnknownInstance(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn save_load_identity(inst in instance()) {
        let dir = tempfile::tempdir().unwrap();
        save_problem(&inst, dir.path()).unwrap();
        let back = load_problem(dir.path()).unwrap();
        prop_assert_eq!(&back, &inst);
        let model = fs::read(dir.path().join("model.mzn")).ok();
        prop_assert_eq!(model, inst.ground_truth_model.as_ref().map(|m| m.as_bytes().to_vec()));
    }

    #[test]
    fn cross_validate_is_order_independent(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let dir = tempfile::tempdir().unwrap();
        let mut j = sample_input_json();
        j["parameters"] = json!([
            {"definition": "", "symbol": "M", "shape": []},
            {"definition": "", "symbol": "P", "shape": ["M"]},
            {"definition": "", "symbol": "Q", "shape": []},
            {"definition": "", "symbol": "R", "shape": ["M", "M"]}
        ]);
        write_input(dir.path(), &j);
        fs::write(dir.path().join("data.dzn"), "M = 3; P = [1, 2]; R = 4; Z = 1;").unwrap();
        let inst = load_problem(dir.path()).unwrap();
        let base = cross_validate(&inst).unwrap();
        prop_assert_eq!(base.len(), 4);
        let mut shuffled = inst.clone();
        shuffled.input.parameters.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut got = cross_validate(&shuffled).unwrap();
        let mut want = base.clone();
        got.sort_by_key(|f| f.to_string());
        want.sort_by_key(|f| f.to_string());
        prop_assert_eq!(got, want);
    }
}
