use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use zincpilot_core::batch::{
    load_outcomes, run_batch, select_instances, BatchSettings, RunManifest, TransportSpec, MANIFEST_FILE,
};
use zincpilot_core::corpus::{check_invariants, cross_validate, Corpus, Finding, INPUT_FILE};
use zincpilot_core::evaluator::{emit_leaderboard, judge_instance, EvaluationReport, LeaderboardFormat, Tolerance};
use zincpilot_core::gateway::{CompletionConfig, Gateway, DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT};
use zincpilot_core::grammar::{load_grammar, render_grammar_for_prompt, shipped_grammar, validate_syntax, GrammarSpec};
use zincpilot_core::harness::{Harness, SolverConfig, Toolchain, DEFAULT_SOLVER};
use zincpilot_core::strategies::StrategyId;
use zincpilot_editor::{live_transport_factory, EditorConfig};

#[derive(Parser)]
#[command(
    name = "zincpilot",
    version,
    about = "Natural language to MiniZinc: batch runs, scoring and curation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy over corpus instances, then solve and score each model.
    Run(RunArgs),
    /// Aggregate recorded outcomes into a leaderboard.
    Evaluate(EvaluateArgs),
    /// Check model files against the MiniZinc grammar.
    Check(CheckArgs),
    /// Validate corpus instances against the schema and their data files.
    ValidateCorpus(ValidateArgs),
    /// Serve the editor API (and UI assets, if given).
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportKind {
    Live,
    Replay,
    Mock,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, required_unless_present = "from_manifest")]
    strategy: Option<StrategyId>,
    /// Corpus root; selects all its instances unless --instance is given.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Instance id (within --corpus) or instance directory. Repeatable.
    #[arg(long = "instance")]
    instances: Vec<String>,
    #[arg(long, value_enum, default_value = "live")]
    transport: TransportKind,
    /// JSON-lines trace for --transport replay.
    #[arg(long, required_if_eq("transport", "replay"))]
    trace: Option<PathBuf>,
    /// Responder for --transport mock.
    #[arg(long, default_value = "oracle", value_parser = clap::builder::PossibleValuesParser::new(TransportSpec::MOCKS))]
    mock: String,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    /// Environment variable holding the API key for --transport live.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    /// Chat model name sent to the endpoint.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value = DEFAULT_SOLVER)]
    solver: String,
    /// Solver time limit in seconds.
    #[arg(long, default_value_t = 60)]
    time_limit: u64,
    /// Instances processed in parallel. Above 1, call order across
    /// instances varies; per-instance results do not.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replays a previous run from its manifest and recorded trace.
    #[arg(long, conflicts_with_all = ["strategy", "transport", "trace", "instances"])]
    from_manifest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// A run directory or a directory of runs.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: LeaderboardFormat,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CheckArgs {
    /// .mzn files to check.
    files: Vec<PathBuf>,
    /// EBNF grammar file replacing the bundled grammar.
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Print the grammar as it is shown to the LLM and exit.
    #[arg(long)]
    render_grammar: bool,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Also solve each ground-truth model and compare with its expected output.
    #[arg(long)]
    solve: bool,
    #[arg(long, default_value = DEFAULT_SOLVER)]
    solver: String,
    #[arg(long, default_value_t = 60)]
    time_limit: u64,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, env = "ZINCPILOT_CORPUS")]
    corpus: PathBuf,
    #[arg(long, env = "ZINCPILOT_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Maximum concurrent solver processes.
    #[arg(long, env = "ZINCPILOT_PARALLELISM", default_value_t = 2)]
    parallelism: usize,
    /// Built editor UI served at /.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_SOLVER)]
    solver: String,
    #[arg(long, default_value_t = 60)]
    time_limit: u64,
    /// Chat-completions endpoint for the assistant.
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    #[arg(long)]
    model: Option<String>,
}

fn harness(solver: &str, secs: u64, parallelism: usize) -> Result<Harness> {
    let config = SolverConfig::new(solver, Duration::from_secs(secs))?;
    let toolchain = Toolchain::discover()?;
    Ok(Harness::new(toolchain, config)?
        .with_parallelism(parallelism)
        .with_cache())
}

/// Resolves `--instance` values to instance directories.
fn selection(corpus: Option<&Corpus>, instances: &[String]) -> Result<Vec<PathBuf>> {
    let mut ids = Vec::new();
    let mut dirs = Vec::new();
    for i in instances {
        let p = Path::new(i);
        if p.join(INPUT_FILE).is_file() {
            dirs.push(p.to_path_buf());
        } else {
            ids.push(i.clone());
        }
    }
    match corpus {
        Some(c) if instances.is_empty() => Ok(select_instances(c, &[])?),
        Some(c) => {
            dirs.extend(select_instances(c, &ids)?);
            Ok(dirs)
        }
        None if !ids.is_empty() => bail!("instance ids {ids:?} need --corpus (or pass instance directories)"),
        None if dirs.is_empty() => bail!("nothing to run: pass --corpus and/or --instance"),
        None => Ok(dirs),
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let (strategy, transport, completion, solver, corpus_root, selected) = match &a.from_manifest {
        Some(path) => {
            let m = RunManifest::load(path)?;
            let dir = path.parent().unwrap_or(Path::new("."));
            let transport = m.replay_spec(dir);
            (m.strategy, transport, m.completion, m.solver, m.corpus, m.instances)
        }
        None => {
            let strategy = a.strategy.expect("required by clap");
            let transport = match a.transport {
                TransportKind::Live => TransportSpec::Live {
                    endpoint: a.endpoint.clone(),
                    api_key_env: a.api_key_env.clone(),
                },
                TransportKind::Replay => TransportSpec::Replay {
                    trace: a.trace.clone().expect("required by clap"),
                },
                TransportKind::Mock => TransportSpec::Mock { name: a.mock.clone() },
            };
            let mut completion = CompletionConfig::default();
            if let Some(m) = &a.model {
                completion.model = m.clone();
            }
            let solver = SolverConfig::new(&a.solver, Duration::from_secs(a.time_limit))?;
            let corpus = a.corpus.as_ref().map(Corpus::open).transpose()?;
            let selected = selection(corpus.as_ref(), &a.instances)?;
            (strategy, transport, completion, solver, a.corpus.clone(), selected)
        }
    };

    let instances: Vec<_> = selected
        .iter()
        .filter_map(|p| zincpilot_core::corpus::load_problem(p).ok())
        .collect();
    let gateway = Gateway::new(transport.build(&instances)?, completion);
    let toolchain = Toolchain::discover()?;
    let harness = Harness::new(toolchain, solver)?.with_parallelism(a.jobs).with_cache();
    let settings = BatchSettings {
        strategy,
        transport,
        gateway: &gateway,
        harness: &harness,
        grammar: shipped_grammar(),
        tolerance: Tolerance::default(),
        jobs: a.jobs,
    };
    let manifest = run_batch(&selected, corpus_root.as_deref(), &settings, &a.out)?;
    let failed = manifest.entries.iter().filter(|e| e.error.is_some()).count();
    println!(
        "run {}: {} {} instance(s), {} failed; manifest {}",
        manifest.run_id,
        strategy,
        manifest.entries.len(),
        failed,
        a.out.join(MANIFEST_FILE).display()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let outcomes = load_outcomes(&a.results)?;
    if outcomes.is_empty() {
        bail!("no outcomes under {}", a.results.display());
    }
    let report = EvaluationReport::from_outcomes(outcomes, Tolerance::default());
    let text = emit_leaderboard(&report, a.format);
    match &a.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Exit status 1 when any file fails the check.
fn cmd_check(a: CheckArgs) -> Result<bool> {
    let custom: Option<GrammarSpec> = match &a.grammar {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(load_grammar(&text).with_context(|| format!("loading {}", p.display()))?)
        }
        None => None,
    };
    let grammar = custom.as_ref().unwrap_or_else(|| shipped_grammar());
    if a.render_grammar {
        print!("{}", render_grammar_for_prompt(grammar));
        return Ok(true);
    }
    if a.files.is_empty() {
        bail!("no files to check");
    }
    let mut clean = true;
    for f in &a.files {
        let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        let diags = validate_syntax(&text, grammar);
        if diags.is_empty() {
            println!("{}: ok", f.display());
        }
        for d in &diags {
            clean = false;
            println!("{}:{d}", f.display());
        }
    }
    Ok(clean)
}

/// Exit status 1 when any instance is invalid.
fn cmd_validate(a: ValidateArgs) -> Result<bool> {
    let corpus = Corpus::open(&a.corpus)?;
    let harness = a.solve.then(|| harness(&a.solver, a.time_limit, 1)).transpose()?;
    let mut bad = 0;
    let all = corpus.load_all();
    for (id, loaded) in &all {
        let mut problems = Vec::new();
        let mut warnings = Vec::new();
        match loaded {
            Err(e) => problems.push(e.to_string()),
            Ok(inst) => {
                problems.extend(check_invariants(inst));
                match cross_validate(inst) {
                    Err(e) => problems.push(format!("data: {e}")),
                    Ok(findings) => {
                        for f in findings {
                            match f {
                                Finding::UnusedBinding { .. } => warnings.push(f.to_string()),
                                _ => problems.push(f.to_string()),
                            }
                        }
                    }
                }
                if let (Some(h), Some(model)) = (&harness, &inst.ground_truth_model) {
                    let result = h.solve(model, &inst.data_text)?;
                    let o = judge_instance(inst, "ground-truth", result, h, Tolerance::default());
                    if !o.excluded() && !o.solution_correct {
                        problems.push(format!(
                            "ground truth does not reproduce the expected output: {:?}",
                            o.detail
                        ));
                    }
                }
            }
        }
        if problems.is_empty() {
            println!(
                "ok    {id}{}",
                if warnings.is_empty() {
                    String::new()
                } else {
                    format!(" (warning: {})", warnings.join(", "))
                }
            );
        } else {
            bad += 1;
            println!("FAIL  {id}: {}", problems.join("; "));
        }
    }
    println!("{} instance(s), {bad} invalid", all.len());
    Ok(bad == 0)
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let harness = match harness(&a.solver, a.time_limit, a.parallelism) {
        Ok(h) => Some(h),
        Err(e) => {
            log::warn!("execution disabled: {e}");
            None
        }
    };
    let mut config = EditorConfig::new(&a.corpus, harness);
    Corpus::open(&a.corpus)?;
    config.static_dir = a.static_dir;
    config.transports = live_transport_factory(a.endpoint);
    if let Some(m) = a.model {
        config.completion.model = m;
    }
    zincpilot_editor::serve_blocking(config, a.listen)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| true),
        Command::Check(a) => cmd_check(a),
        Command::ValidateCorpus(a) => cmd_validate(a),
        Command::Serve(a) => cmd_serve(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
