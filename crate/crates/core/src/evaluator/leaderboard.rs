use std::fmt::Write;
use std::str::FromStr;

use serde_json::json;

use super::{format_percent, Aggregate, EvaluationReport};
use crate::strategies::StrategyId;

/// Bumped whenever the JSON layout changes.
pub const LEADERBOARD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeaderboardFormat {
    Json,
    Markdown,
    Csv,
}

impl FromStr for LeaderboardFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown format `{other}` (expected json, markdown or csv)")),
        }
    }
}

/// Renders `report`; identical reports give identical text.
pub fn emit_leaderboard(report: &EvaluationReport, format: LeaderboardFormat) -> String {
    match format {
        LeaderboardFormat::Json => json(report),
        LeaderboardFormat::Markdown => markdown(report),
        LeaderboardFormat::Csv => csv(report),
    }
}

fn calls(strategy: &str) -> String {
    strategy
        .parse::<StrategyId>()
        .map(|s| s.budget().to_string())
        .unwrap_or_else(|_| "-".into())
}

fn label(strategy: &str) -> String {
    strategy
        .parse::<StrategyId>()
        .map(|s| s.label().to_string())
        .unwrap_or_else(|_| strategy.to_string())
}

/// Instance count of a source: the largest `n` any strategy has there.
fn source_n(report: &EvaluationReport, source: &str) -> usize {
    report
        .aggregates
        .iter()
        .filter(|a| a.source == source)
        .map(|a| a.n)
        .max()
        .unwrap_or(0)
}

fn cell_json(a: &Aggregate) -> serde_json::Value {
    json!({
        "source": a.source,
        "strategy": a.strategy,
        "n": a.n,
        "executed": a.executed,
        "correct": a.correct,
        "excluded": a.excluded,
        "e_acc": format_percent(a.executed, a.n),
        "s_acc": format_percent(a.correct, a.n),
    })
}

fn json(report: &EvaluationReport) -> String {
    let v = json!({
        "schema_version": LEADERBOARD_SCHEMA_VERSION,
        "metrics": {
            "e_acc": "percentage of instances whose model compiled and ran",
            "s_acc": "percentage of instances solved correctly",
            "satisfaction_scoring": "verifier",
            "tolerance": {"abs": report.tolerance.abs, "rel": report.tolerance.rel},
        },
        "sources": report.sources().iter().map(|s| json!({"name": s, "n": source_n(report, s)})).collect::<Vec<_>>(),
        "rows": report.aggregates.iter().map(cell_json).collect::<Vec<_>>(),
        "totals": report.totals.iter().map(cell_json).collect::<Vec<_>>(),
        "exclusions": report.exclusions,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("leaderboard serializes");
    s.push('\n');
    s
}

fn markdown(report: &EvaluationReport) -> String {
    let sources = report.sources();
    let strategies = report.strategies();
    let mut out = String::new();
    out.push_str("| Strategy | LLM Calls |");
    for s in &sources {
        let n = source_n(report, s);
        let _ = write!(out, " {s} (n={n}) E_acc | {s} (n={n}) S_acc |");
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|---|".repeat(sources.len()));
    out.push('\n');
    for st in &strategies {
        let _ = write!(out, "| {} | {} |", label(st), calls(st));
        for src in &sources {
            match report.cell(src, st) {
                Some(a) => {
                    let _ = write!(
                        out,
                        " {} | {} |",
                        format_percent(a.executed, a.n),
                        format_percent(a.correct, a.n)
                    );
                }
                None => out.push_str(" - | - |"),
            }
        }
        out.push('\n');
    }

    let n_total: usize = sources.iter().map(|s| source_n(report, s)).sum();
    let _ = write!(out, "\nTotals (n={n_total})\n\n|  |");
    for st in &strategies {
        let _ = write!(out, " {} |", label(st));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(strategies.len()));
    out.push('\n');
    for (name, pick) in [("E_acc", 0), ("S_acc", 1)] {
        let _ = write!(out, "| {name} |");
        for st in &strategies {
            let t = report.total(st).expect("every strategy has a total");
            let _ = write!(out, " {} |", if pick == 0 { t.executed } else { t.correct });
        }
        out.push('\n');
    }

    if !report.exclusions.is_empty() {
        out.push_str("\nExcluded from scoring:\n\n");
        for e in &report.exclusions {
            let _ = writeln!(out, "- {} ({}): {}", e.instance, e.strategy, e.reason);
        }
    }
    out
}

fn csv(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "strategy",
        "source",
        "llm_calls",
        "n",
        "executed",
        "correct",
        "excluded",
        "e_acc",
        "s_acc",
    ];
    w.write_record(header).expect("in-memory write");
    for a in report.aggregates.iter().chain(&report.totals) {
        w.write_record([
            a.strategy.clone(),
            a.source.clone(),
            calls(&a.strategy),
            a.n.to_string(),
            a.executed.to_string(),
            a.correct.to_string(),
            a.excluded.to_string(),
            format_percent(a.executed, a.n),
            format_percent(a.correct, a.n),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
