use std::sync::LazyLock;
use std::time::Duration;

use zincpilot_core::harness::{Harness, SolverConfig, Toolchain};

/// One harness per test binary so that solver runs are serialized.
pub static HARNESS: LazyLock<Harness> = LazyLock::new(|| {
    let toolchain = Toolchain::discover().unwrap_or_else(|e| panic!("{e}"));
    Harness::new(toolchain, SolverConfig::new("gecode", Duration::from_secs(30)).unwrap())
        .unwrap()
        .with_cache()
});

pub fn harness() -> &'static Harness {
    &HARNESS
}

/// Pigeonhole with pairwise disequalities: infeasible, and the CP search
/// cannot prove it within seconds.
pub const HARD_MODEL: &str = "int: n = 12;\narray[1..n+1] of var 1..n: x;\nconstraint forall(i, j in 1..n+1 where i < j)(x[i] != x[j]);\nsolve satisfy;\n";
