mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::fixture_corpus_root;
use common::solver::harness;
use zincpilot_core::batch::{
    find_runs, load_outcomes, run_batch, select_instances, BatchSettings, RunManifest, TransportSpec, MANIFEST_FILE,
    TRACE_FILE,
};
use zincpilot_core::corpus::{load_problem, Corpus};
use zincpilot_core::evaluator::{EvaluationReport, Tolerance};
use zincpilot_core::gateway::{CompletionConfig, Gateway};
use zincpilot_core::grammar::shipped_grammar;
use zincpilot_core::strategies::StrategyId;

fn run(strategy: StrategyId, transport: TransportSpec, selection: &[PathBuf], jobs: usize, out: &Path) -> RunManifest {
    let instances: Vec<_> = selection.iter().filter_map(|p| load_problem(p).ok()).collect();
    let gateway = Gateway::new(transport.build(&instances).unwrap(), CompletionConfig::default());
    let settings = BatchSettings {
        strategy,
        transport,
        gateway: &gateway,
        harness: harness(),
        grammar: shipped_grammar(),
        tolerance: Tolerance::default(),
        jobs,
    };
    run_batch(selection, Some(&fixture_corpus_root()), &settings, out).unwrap()
}

fn all_instances() -> Vec<PathBuf> {
    select_instances(&Corpus::open(fixture_corpus_root()).unwrap(), &[]).unwrap()
}

fn mock(name: &str) -> TransportSpec {
    TransportSpec::Mock { name: name.into() }
}

fn outcome_bytes(out: &Path, m: &RunManifest) -> Vec<Vec<u8>> {
    m.entries
        .iter()
        .map(|e| fs::read(out.join(e.outcome.as_ref().unwrap())).unwrap())
        .collect()
}

#[test]
fn oracle_batch_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run(
        StrategyId::KnowledgeGraph,
        mock("oracle"),
        &all_instances(),
        1,
        tmp.path(),
    );
    assert_eq!(m.entries.len(), 12);
    assert!(m
        .entries
        .iter()
        .all(|e| e.calls == 2 && e.error.is_none() && !e.degraded));
    for e in &m.entries {
        let dir = tmp.path().join(&e.instance);
        for f in ["model.mzn", "generated.json", "outcome.json", "trace.jsonl"] {
            assert!(dir.join(f).is_file(), "{}/{f}", e.instance);
        }
    }
    assert_eq!(
        fs::read_to_string(tmp.path().join(TRACE_FILE)).unwrap().lines().count(),
        24
    );
    let report = EvaluationReport::from_outcomes(load_outcomes(tmp.path()).unwrap(), Tolerance::default());
    let t = report.total("kg").unwrap();
    assert_eq!((t.n, t.executed, t.correct), (12, 12, 12));
    assert_eq!(RunManifest::load(&tmp.path().join(MANIFEST_FILE)).unwrap(), m);
}

#[test]
fn garbage_batch_never_executes() {
    let tmp = tempfile::tempdir().unwrap();
    run(StrategyId::ZeroShot, mock("garbage"), &all_instances(), 1, tmp.path());
    let report = EvaluationReport::from_outcomes(load_outcomes(tmp.path()).unwrap(), Tolerance::default());
    let t = report.total("zero-shot").unwrap();
    assert_eq!((t.n, t.executed, t.correct), (12, 0, 0));
}

/// Replaying a run through its own manifest and trace reproduces every
/// outcome file byte for byte.
#[test]
fn manifest_replay_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let selection: Vec<PathBuf> = all_instances().into_iter().step_by(3).collect();
    let first = tmp.path().join("first");
    let m = run(StrategyId::CoTCodeGrammar, mock("oracle"), &selection, 1, &first);

    let replayed = tmp.path().join("replayed");
    let again = run(m.strategy, m.replay_spec(&first), &m.instances, 1, &replayed);
    assert_eq!(outcome_bytes(&first, &m), outcome_bytes(&replayed, &again));
    assert_eq!(
        m.entries.iter().map(|e| e.calls).collect::<Vec<_>>(),
        again.entries.iter().map(|e| e.calls).collect::<Vec<_>>()
    );
    for e in &m.entries {
        let a = fs::read(first.join(&e.instance).join("model.mzn")).unwrap();
        let b = fs::read(replayed.join(&e.instance).join("model.mzn")).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!(find_runs(tmp.path()).unwrap(), [first, replayed]);
}

#[test]
fn parallel_jobs_give_the_same_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let selection: Vec<PathBuf> = all_instances().into_iter().take(5).collect();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ma = run(StrategyId::CoT, mock("oracle"), &selection, 1, &a);
    let mb = run(StrategyId::CoT, mock("oracle"), &selection, 3, &b);
    assert_eq!(outcome_bytes(&a, &ma), outcome_bytes(&b, &mb));
    assert_eq!(
        ma.entries.iter().map(|e| &e.instance).collect::<Vec<_>>(),
        mb.entries.iter().map(|e| &e.instance).collect::<Vec<_>>()
    );
}

/// A broken instance or a failing strategy is recorded; the batch goes on.
#[test]
fn instance_failures_are_data() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = tmp.path().join("broken");
    fs::create_dir_all(&broken).unwrap();
    fs::write(broken.join("input.json"), "{ not json").unwrap();
    let good = all_instances().into_iter().next().unwrap();
    let out = tmp.path().join("out");

    let m = run(StrategyId::Agentic, mock("oracle"), &[broken, good], 1, &out);
    assert_eq!(m.entries.len(), 2);
    let bad = &m.entries[0];
    assert!(bad.error.as_deref().unwrap().contains("malformed input"), "{bad:?}");
    assert!(bad.outcome.is_none());
    assert_eq!(m.entries[1].calls, 4);
    assert!(m.entries[1].error.is_none());
    assert_eq!(load_outcomes(&out).unwrap().len(), 1);
}

#[test]
fn unknown_mock_is_a_config_error() {
    assert!(mock("nope").build(&[]).is_err());
    let err = select_instances(&Corpus::open(fixture_corpus_root()).unwrap(), &["missing".into()]).unwrap_err();
    assert!(err.to_string().contains("missing"));
}
