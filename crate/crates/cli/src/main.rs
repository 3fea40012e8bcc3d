mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hetvd_core::corpus::{build_manifest, Manifest, ManifestOptions, EVALUATION_CWES};
use hetvd_core::extraction::{read_predictions, CweHierarchy, VoteRule};
use hetvd_core::gametheory::{
    coalition_value, equilibrium_check, shapley, superadditivity_check, verifier_marginal,
    PairStatus, ValuationFile,
};
use hetvd_core::metrics::BootstrapConfig;
use hetvd_core::orchestrator::{
    cost_report, read_ledger, CostReport, Mode, Orchestrator, Providers, Repricing, RunConfig,
};
use hetvd_core::provider::{
    CompletionBackend, HttpBackend, MockBackend, MockReply, MockScript, PricingModel, Provider,
    ReplayBackend, ResponseCache,
};
use hetvd_core::report::{self, evaluate_system, render_all, SystemEvaluation, Table};
use hetvd_core::Cwe;

use config::{resolve, ResolvedProvider, Settings, Side};

/// Heterogeneous multi-agent vulnerability detection harness.
#[derive(Parser)]
#[command(name = "hetvd", version, about)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sample manifest from a Juliet test-suite checkout.
    ExtractCorpus(ExtractArgs),
    /// Run an experiment over a manifest.
    Run(RunArgs),
    /// Score one or more prediction files against a manifest.
    Evaluate(EvaluateArgs),
    /// Shapley values, super-additivity and equilibrium analysis of a valuation file.
    GameAnalysis(GameArgs),
    /// Aggregate run ledgers into cost and latency figures.
    CostReport(CostArgs),
    /// Render result tables from saved evaluations.
    RenderTables(RenderArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Juliet root (the directory containing `testcases/`, or `testcases/` itself).
    #[arg(long)]
    root: PathBuf,
    /// Keep only files whose stem ends with this suffix.
    #[arg(long, default_value = "_01")]
    variant: String,
    /// Maximum vulnerable and maximum benign samples per CWE.
    #[arg(long, default_value_t = 10)]
    cap: usize,
    /// Comma-separated CWE ids to keep, or `all`. Defaults to the fourteen evaluation CWEs.
    #[arg(long)]
    cwes: Option<String>,
    /// Keep comments and original function names.
    #[arg(long)]
    no_redact: bool,
    /// Manifest file to write (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Http,
    Replay,
    Mock,
}

#[derive(Clone, Copy, ValueEnum)]
enum VoteChoice {
    Union,
    PerReport,
}

impl From<VoteChoice> for VoteRule {
    fn from(v: VoteChoice) -> Self {
        match v {
            VoteChoice::Union => VoteRule::Union,
            VoteChoice::PerReport => VoteRule::PerReport,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Manifest produced by `extract-corpus`.
    #[arg(long)]
    manifest: PathBuf,
    /// Execution mode: parallel_v, parallel_nov, serial_v or single_expert.
    #[arg(long = "config", value_name = "MODE")]
    mode: Option<Mode>,
    /// Completion backend.
    #[arg(long, value_enum, default_value = "http")]
    backend: BackendChoice,
    /// Output directory for predictions.jsonl and ledger.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// With `--backend replay`: forward cache misses over HTTP and store the replies.
    #[arg(long)]
    record: bool,
    /// Response cache directory for the replay backend (default: <out>/cache).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// TOML file with [providers.expert], [providers.verifier] and [run] sections.
    #[arg(long)]
    provider_config: Option<PathBuf>,
    /// JSON mock script for `--backend mock` (default: every agent answers "no").
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Samples processed concurrently.
    #[arg(long)]
    concurrency: Option<usize>,
    /// How the CWE clause of the majority vote is applied.
    #[arg(long, value_enum)]
    vote_rule: Option<VoteChoice>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Prediction file, optionally named: `NAME=PATH`. Repeat to compare systems.
    #[arg(long, required = true, num_args = 1..)]
    predictions: Vec<String>,
    /// Ground-truth manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Count a CWE as matched only on exact id equality.
    #[arg(long)]
    flat_cwes: bool,
}

#[derive(Args)]
struct GameArgs {
    /// Valuation file (JSON, or TOML when the extension is .toml).
    #[arg(long)]
    valuation: PathBuf,
    /// Directory for CSV, text and JSON outputs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CostArgs {
    /// Ledger file, optionally named: `NAME=PATH`. Repeat for several runs.
    #[arg(long, required = true, num_args = 1..)]
    ledger: Vec<String>,
    /// Re-bill expert calls at `INPUT,OUTPUT` dollars per million tokens.
    #[arg(long, value_name = "IN,OUT")]
    expert_rates: Option<String>,
    /// Re-bill non-local verifier calls at `INPUT,OUTPUT` dollars per million tokens.
    #[arg(long, value_name = "IN,OUT")]
    verifier_rates: Option<String>,
    /// Directory for CSV and text outputs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// `evaluation.json` written by `evaluate`. Repeat to merge.
    #[arg(long, required = true, num_args = 1..)]
    evaluation: Vec<PathBuf>,
    /// Directory for CSV and text outputs.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::ExtractCorpus(a) => cmd_extract_corpus(a),
        Command::Run(a) => cmd_run(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::GameAnalysis(a) => cmd_game_analysis(a),
        Command::CostReport(a) => cmd_cost_report(a),
        Command::RenderTables(a) => cmd_render_tables(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = format!("{e:#}").replace('\n', " ");
            eprintln!("hetvd: error: {line}");
            ExitCode::FAILURE
        }
    }
}

/// Print to stdout; a closed pipe is not an error.
fn say(text: String) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Write `<name>.csv` and `<name>.txt`; returns the text rendering.
fn emit_table(dir: Option<&Path>, name: &str, table: &Table) -> Result<String> {
    let text = table.to_text();
    if let Some(dir) = dir {
        write_file(&dir.join(format!("{name}.csv")), &table.to_csv())?;
        write_file(&dir.join(format!("{name}.txt")), &text)?;
    }
    Ok(text)
}

fn file_stem_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("system");
    if matches!(stem, "predictions" | "ledger") {
        if let Some(parent) = path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
        {
            return parent.to_string();
        }
    }
    stem.to_string()
}

/// `NAME=PATH` or bare `PATH`.
fn named_path(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !Path::new(arg).exists() => {
            (name.to_string(), PathBuf::from(path))
        }
        _ => {
            let path = PathBuf::from(arg);
            (file_stem_name(&path), path)
        }
    }
}

fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn parse_cwes(spec: Option<&str>) -> Result<Option<BTreeSet<Cwe>>> {
    match spec.map(str::trim) {
        None => Ok(Some(
            EVALUATION_CWES
                .iter()
                .map(|&c| Cwe::new(c).expect("valid id"))
                .collect(),
        )),
        Some("all") => Ok(None),
        Some(list) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<Cwe>()
                    .map_err(|e| anyhow::anyhow!("bad CWE `{s}`: {e}"))
            })
            .collect::<Result<BTreeSet<_>>>()
            .map(Some),
    }
}

fn cmd_extract_corpus(a: ExtractArgs) -> Result<()> {
    let options = ManifestOptions {
        variant_filter: a.variant,
        per_cwe_cap: a.cap,
        cwes: parse_cwes(a.cwes.as_deref())?,
        redact: !a.no_redact,
    };
    let manifest = build_manifest(&a.root, &options)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    manifest.save(&a.out)?;
    let mut t = Table::new("Extracted samples", &["CWE", "Vulnerable", "Benign"]);
    for (cwe, c) in manifest.per_cwe_counts() {
        t.push(vec![
            cwe.to_string(),
            c.vulnerable.to_string(),
            c.benign.to_string(),
        ]);
    }
    let totals = manifest.totals();
    t.push(vec![
        "Total".into(),
        totals.vulnerable.to_string(),
        totals.benign.to_string(),
    ]);
    say(t.to_text());
    Ok(())
}

fn mode_from_settings(settings: &Settings) -> Result<Option<Mode>> {
    settings
        .run
        .mode
        .as_deref()
        .map(|m| {
            m.parse::<Mode>()
                .map_err(|e| anyhow::anyhow!("[run] mode: {e}"))
        })
        .transpose()
}

fn vote_from_settings(settings: &Settings) -> Result<Option<VoteRule>> {
    match settings.run.vote_rule.as_deref() {
        None => Ok(None),
        Some("union") => Ok(Some(VoteRule::Union)),
        Some("per_report") | Some("per-report") => Ok(Some(VoteRule::PerReport)),
        Some(other) => bail!("[run] vote_rule: unknown rule `{other}` (union or per_report)"),
    }
}

fn bind(backend: Arc<dyn CompletionBackend>, settings: &ResolvedProvider) -> Provider {
    if settings.local {
        Provider::local(backend)
    } else {
        Provider::new(backend, settings.pricing)
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let settings = Settings::load(a.provider_config.as_deref())?;
    let env = |k: &str| std::env::var(k).ok();
    let expert = resolve(Side::Expert, &settings.providers.expert, &env)?;
    let verifier = resolve(Side::Verifier, &settings.providers.verifier, &env)?;

    let mode = match a.mode {
        Some(m) => m,
        None => mode_from_settings(&settings)?.unwrap_or(Mode::ParallelV),
    };
    let mut run = RunConfig::for_mode(mode);
    run.sample_concurrency = a
        .concurrency
        .or(settings.run.sample_concurrency)
        .unwrap_or(run.sample_concurrency);
    run.vote_rule = match a.vote_rule {
        Some(v) => v.into(),
        None => vote_from_settings(&settings)?.unwrap_or_default(),
    };
    if let Some(model) = &expert.model {
        run.expert_roles = run
            .expert_roles
            .into_iter()
            .map(|r| r.with_model(model.clone()))
            .collect();
    }
    if let Some(model) = &verifier.model {
        run.verifier = run.verifier.map(|r| r.with_model(model.clone()));
    }
    run.validate()?;

    if a.record && !matches!(a.backend, BackendChoice::Replay) {
        bail!("--record only applies to --backend replay");
    }
    if a.mock_script.is_some() && !matches!(a.backend, BackendChoice::Mock) {
        bail!("--mock-script only applies to --backend mock");
    }
    let manifest = Manifest::load(&a.manifest)?;
    log::info!(
        "{} samples from {}, mode {mode}",
        manifest.len(),
        a.manifest.display()
    );
    let http = |side: Side, resolved: &ResolvedProvider| -> Result<Arc<dyn CompletionBackend>> {
        Ok(Arc::new(HttpBackend::new(resolved.http_config(side)?)?))
    };
    let needs_verifier = run.verifier_enabled();
    let providers = match a.backend {
        BackendChoice::Http => {
            let e = http(Side::Expert, &expert)?;
            let v = if needs_verifier {
                http(Side::Verifier, &verifier)?
            } else {
                e.clone()
            };
            Providers {
                expert: bind(e, &expert),
                verifier: bind(v, &verifier),
            }
        }
        BackendChoice::Replay => {
            let dir = a
                .cache
                .clone()
                .or_else(|| settings.run.cache_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| a.out.join("cache"));
            let cache = ResponseCache::open(&dir)?;
            let wrap =
                |side: Side, resolved: &ResolvedProvider| -> Result<Arc<dyn CompletionBackend>> {
                    Ok(if a.record {
                        Arc::new(ReplayBackend::recording(
                            cache.clone(),
                            http(side, resolved)?,
                        ))
                    } else {
                        Arc::new(ReplayBackend::replay_only(cache.clone()))
                    })
                };
            let e = wrap(Side::Expert, &expert)?;
            let v = if needs_verifier {
                wrap(Side::Verifier, &verifier)?
            } else {
                e.clone()
            };
            Providers {
                expert: bind(e, &expert),
                verifier: bind(v, &verifier),
            }
        }
        BackendChoice::Mock => {
            let script = match &a.mock_script {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                    serde_json::from_str::<MockScript>(&text)
                        .with_context(|| format!("{}: invalid mock script", path.display()))?
                }
                None => MockScript {
                    default: Some(MockReply::text(
                        "VULNERABILITY_FOUND: no\nCWE_IDs: []\nSEVERITY: none\nEVIDENCE: none\nCONFIDENCE: low",
                    )),
                    ..Default::default()
                },
            };
            let backend: Arc<dyn CompletionBackend> = Arc::new(MockBackend::from_script(script));
            Providers {
                expert: bind(backend.clone(), &expert),
                verifier: bind(backend, &verifier),
            }
        }
    };

    let result = Orchestrator::new(run, providers)?.run_experiment(&manifest)?;
    result.write_outputs(&a.out)?;
    say(format!(
        "{}: {} samples, {} failures, ${:.4} API cost, {:.1} s wall -> {}",
        mode,
        result.results.len(),
        result.failure_count(),
        result.total_cost(),
        result.wall_seconds,
        a.out.display()
    ) + "\n");
    Ok(())
}

/// Mode and cost from a `ledger.jsonl` next to the predictions, if any.
fn sibling_ledger(predictions: &Path) -> Result<Option<(Mode, CostReport)>> {
    let path = predictions.with_file_name("ledger.jsonl");
    if !path.is_file() {
        return Ok(None);
    }
    let records = read_ledger(&path)?;
    Ok(records
        .first()
        .map(|r| (r.mode, cost_report(&records, None))))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let hierarchy = if a.flat_cwes {
        CweHierarchy::flat()
    } else {
        CweHierarchy::default()
    };
    let bootstrap = BootstrapConfig {
        resamples: a.resamples,
        seed: a.seed,
    };
    let mut systems: Vec<SystemEvaluation> = Vec::new();
    for arg in &a.predictions {
        let (name, path) = named_path(arg);
        if systems.iter().any(|s| s.name == name) {
            bail!("system name `{name}` given twice; use NAME=PATH to disambiguate");
        }
        let predictions = read_predictions(&path)?;
        let ledger = sibling_ledger(&path)?;
        let mut system = evaluate_system(
            &name,
            ledger.as_ref().map(|l| l.0),
            &predictions,
            &manifest,
            &hierarchy,
            &bootstrap,
        )
        .with_context(|| format!("evaluating {}", path.display()))?;
        system.cost = ledger.map(|l| l.1);
        systems.push(system);
    }
    create_dir(&a.out)?;
    let out = Some(a.out.as_path());
    say(emit_table(out, "metrics", &report::main_table(&systems))?);
    for s in &systems {
        let text = emit_table(
            out,
            &format!("per_cwe_{}", safe_name(&s.name)),
            &report::per_cwe_table(s),
        )?;
        say(format!("\n{text}"));
    }
    if systems.len() > 1 {
        let tests = report::pairwise(&systems)?;
        say(format!(
            "\n{}",
            emit_table(out, "mcnemar", &report::mcnemar_table(&tests))?
        ));
    }
    let json = serde_json::to_string_pretty(&systems)?;
    write_file(&a.out.join("evaluation.json"), &(json + "\n"))?;
    Ok(())
}

fn pair_status(s: PairStatus) -> &'static str {
    match s {
        PairStatus::Satisfied => "ok",
        PairStatus::Violated => "VIOLATED",
        PairStatus::Undetermined => "undetermined",
    }
}

fn opt3(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

fn cmd_game_analysis(a: GameArgs) -> Result<()> {
    let text = fs::read_to_string(&a.valuation)
        .with_context(|| format!("cannot read {}", a.valuation.display()))?;
    let file: ValuationFile = if a.valuation.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: {}", a.valuation.display(), e.message()))?
    } else {
        serde_json::from_str(&text)
            .with_context(|| format!("{}: invalid valuation file", a.valuation.display()))?
    };
    let val = file.valuation()?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
    }
    let out = a.out.as_deref();
    let mut json = serde_json::Map::new();

    let mut coalitions = Table::new("Coalition values", &["Coalition", "q", "c", "v"]);
    for (s, entry) in val.defined() {
        coalitions.push(vec![
            val.label(s),
            format!("{:.3}", entry.q),
            format!("{:.3}", entry.c),
            format!("{:.3}", coalition_value(&val, s)?),
        ]);
    }
    say(emit_table(out, "coalitions", &coalitions)?);

    match shapley(&val) {
        Ok(result) => {
            let mut t = Table::new("Shapley values", &["Player", "phi"]);
            for (p, phi) in result.players.iter().zip(&result.phi) {
                t.push(vec![p.clone(), format!("{phi:+.4}")]);
            }
            t.push(vec!["Total".into(), format!("{:+.4}", result.total())]);
            say(format!("\n{}", emit_table(out, "shapley", &t)?));
            json.insert("shapley".into(), serde_json::to_value(&result)?);
        }
        Err(e) => say(format!("\nShapley values: not computed ({e})") + "\n"),
    }

    let report = superadditivity_check(&val);
    let mut t = Table::new(
        "Super-additivity",
        &["S", "T", "q(S)", "q(T)", "q(S+T)", "Quality", "Value"],
    );
    for p in &report.pairs {
        t.push(vec![
            p.s.clone(),
            p.t.clone(),
            opt3(p.q_s),
            opt3(p.q_t),
            opt3(p.q_union),
            pair_status(p.quality).into(),
            pair_status(p.value).into(),
        ]);
    }
    say(format!("\n{}", emit_table(out, "superadditivity", &t)?));
    say(format!(
        "quality violations: {}, value violations: {}",
        report.quality_violations().len(),
        report.value_violations().len()
    ) + "\n");
    json.insert("superadditivity".into(), serde_json::to_value(&report)?);

    if let Some(v) = &file.verifier {
        match verifier_marginal(&val, v) {
            Ok(m) => {
                say(format!(
                    "\nmarginal contribution of {v}: {:+.4}{}",
                    m.value,
                    if m.harmful { " (harmful)" } else { "" }
                ) + "\n");
                json.insert("verifier_marginal".into(), serde_json::to_value(m)?);
            }
            Err(e) => say(format!("\nmarginal contribution of {v}: not computed ({e})") + "\n"),
        }
    }

    if let Some(game) = &file.game {
        let eq = equilibrium_check(game)?;
        let mut t = Table::new(
            "Verification game payoffs",
            &["Expert", "Verifier", "Expert payoff", "Verifier payoff"],
        );
        for c in &eq.cells {
            t.push(vec![
                c.expert.to_string(),
                c.verifier.to_string(),
                format!("{:.4}", c.expert_payoff),
                format!("{:.4}", c.verifier_payoff),
            ]);
        }
        say(format!("\n{}", emit_table(out, "equilibrium", &t)?));
        say(format!(
            "(high, accept_if_consistent) is a strict Nash equilibrium: {}; penalty condition holds: {}",
            eq.is_ne, eq.theorem_condition_holds
        ) + "\n");
        json.insert("equilibrium".into(), serde_json::to_value(&eq)?);
    }

    if let Some(dir) = out {
        let body = serde_json::to_string_pretty(&serde_json::Value::Object(json))?;
        write_file(&dir.join("game_analysis.json"), &(body + "\n"))?;
    }
    Ok(())
}

fn parse_rates(arg: &str) -> Result<PricingModel> {
    let (i, o) = arg
        .split_once(',')
        .with_context(|| format!("rates `{arg}` must be IN,OUT"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad rate `{s}`"))
    };
    Ok(PricingModel::new(parse(i)?, parse(o)?)?)
}

fn cmd_cost_report(a: CostArgs) -> Result<()> {
    let repricing = match (&a.expert_rates, &a.verifier_rates) {
        (None, None) => None,
        (e, v) => Some(Repricing {
            expert: e
                .as_deref()
                .map(parse_rates)
                .transpose()?
                .unwrap_or(PricingModel::DEEPSEEK_V3),
            verifier: v
                .as_deref()
                .map(parse_rates)
                .transpose()?
                .unwrap_or(PricingModel::DEEPSEEK_V3),
        }),
    };
    let mut reports: BTreeMap<String, CostReport> = BTreeMap::new();
    let mut order = Vec::new();
    for arg in &a.ledger {
        let (name, path) = named_path(arg);
        if reports.contains_key(&name) {
            bail!("ledger name `{name}` given twice; use NAME=PATH to disambiguate");
        }
        let records = read_ledger(&path)?;
        reports.insert(name.clone(), cost_report(&records, repricing.as_ref()));
        order.push(name);
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
    }
    let out = a.out.as_deref();
    let mut t = Table::new(
        "Cost and latency",
        &[
            "Config",
            "Samples",
            "Cost/Sample",
            "Total Cost",
            "Expert Time/Sample (s)",
            "Time/Sample (s)",
            "Failures",
        ],
    );
    let mut roles = Table::new(
        "Cost by role",
        &[
            "Config",
            "Role",
            "Calls",
            "Input tokens",
            "Output tokens",
            "Cost",
        ],
    );
    for name in &order {
        let r = &reports[name];
        t.push(vec![
            name.clone(),
            r.samples.to_string(),
            format!("${:.5}", r.cost_per_sample),
            format!("${:.4}", r.total_cost_dollars),
            format!("{:.2}", r.mean_expert_wall_seconds),
            format!("{:.2}", r.mean_total_wall_seconds),
            r.failures.to_string(),
        ]);
        for (role, c) in &r.by_role {
            roles.push(vec![
                name.clone(),
                role.to_string(),
                c.calls.to_string(),
                c.input_tokens.to_string(),
                c.output_tokens.to_string(),
                format!("${:.4}", c.cost_dollars),
            ]);
        }
    }
    say(emit_table(out, "cost", &t)?);
    say(format!("\n{}", emit_table(out, "cost_by_role", &roles)?));
    Ok(())
}

fn cmd_render_tables(a: RenderArgs) -> Result<()> {
    let mut systems: Vec<SystemEvaluation> = Vec::new();
    for path in &a.evaluation {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let batch: Vec<SystemEvaluation> = serde_json::from_str(&text)
            .with_context(|| format!("{}: not an evaluation file", path.display()))?;
        for s in batch {
            if systems.iter().any(|x| x.name == s.name) {
                bail!(
                    "system `{}` appears in more than one evaluation file",
                    s.name
                );
            }
            systems.push(s);
        }
    }
    create_dir(&a.out)?;
    for (i, (name, table)) in render_all(&systems)?.iter().enumerate() {
        let text = emit_table(Some(&a.out), name, table)?;
        say(format!("{}{text}", if i == 0 { "" } else { "\n" }));
    }
    Ok(())
}
