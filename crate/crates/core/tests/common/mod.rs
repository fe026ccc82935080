#![allow(dead_code)]

pub mod gen;
pub mod solver;
pub mod toy;

use std::path::PathBuf;

use zincpilot_core::corpus::{Corpus, ProblemInstance};

pub fn fixture_corpus_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

pub fn fixture_instances() -> Vec<ProblemInstance> {
    let corpus = Corpus::open(fixture_corpus_root()).unwrap();
    corpus
        .load_all()
        .into_iter()
        .map(|(id, r)| r.unwrap_or_else(|e| panic!("{id}: {e}")))
        .collect()
}
