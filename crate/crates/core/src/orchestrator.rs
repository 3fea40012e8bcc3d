//! Runs the expert and verifier agents over samples and records timing and
//! cost for each one.
//!
//! A sample goes through three steps: the expert phase (three concurrent
//! calls or one after another, depending on mode), then the optional
//! verifier, then [`decide`]. An experiment fans samples out over a
//! bounded worker pool and keeps results in manifest order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::{self, AgentError, AgentRole, RoleName};
use crate::corpus::{Manifest, Sample};
use crate::extraction::{
    decide, parse_expert_report, parse_verifier_verdict, write_predictions, ExpertReport,
    Prediction, PredictionFileError, VoteRule,
};
use crate::provider::{cost, BackendKind, CompletionRequest, PricingModel, Provider};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error(transparent)]
    Predictions(#[from] PredictionFileError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ParallelV,
    ParallelNov,
    SerialV,
    SingleExpert,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::ParallelV,
        Mode::ParallelNov,
        Mode::SerialV,
        Mode::SingleExpert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ParallelV => "parallel_v",
            Mode::ParallelNov => "parallel_nov",
            Mode::SerialV => "serial_v",
            Mode::SingleExpert => "single_expert",
        }
    }

    pub fn uses_verifier(self) -> bool {
        matches!(self, Mode::ParallelV | Mode::SerialV)
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, Mode::ParallelV | Mode::ParallelNov)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = OrchestratorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| OrchestratorError::Config(format!("unknown mode `{s}`")))
    }
}

pub const DEFAULT_SAMPLE_CONCURRENCY: usize = 4;

/// Role used when a mode runs a single expert.
pub const SINGLE_EXPERT_ROLE: RoleName = RoleName::SecurityExpert;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub expert_roles: Vec<AgentRole>,
    /// `None` disables verification.
    pub verifier: Option<AgentRole>,
    pub vote_rule: VoteRule,
    /// Samples processed concurrently.
    pub sample_concurrency: usize,
}

impl RunConfig {
    /// Default roles and models for `mode`.
    pub fn for_mode(mode: Mode) -> Self {
        let expert_roles = match mode {
            Mode::SingleExpert => vec![AgentRole::new(SINGLE_EXPERT_ROLE)],
            _ => AgentRole::experts(),
        };
        RunConfig {
            mode,
            expert_roles,
            verifier: mode.uses_verifier().then(AgentRole::verifier),
            vote_rule: VoteRule::default(),
            sample_concurrency: DEFAULT_SAMPLE_CONCURRENCY,
        }
    }

    pub fn verifier_enabled(&self) -> bool {
        self.verifier.is_some()
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if self.sample_concurrency == 0 {
            return bad("sample_concurrency must be ≥ 1".into());
        }
        if let Some(r) = self.expert_roles.iter().find(|r| !r.name.is_expert()) {
            return bad(format!("{} is not an expert role", r.name));
        }
        if let Some(v) = &self.verifier {
            if v.name != RoleName::Verifier {
                return bad(format!("{} cannot act as verifier", v.name));
            }
        }
        match self.mode {
            Mode::SingleExpert => {
                if self.expert_roles.len() != 1 || self.verifier_enabled() {
                    return bad("single_expert needs exactly one expert and no verifier".into());
                }
            }
            mode => {
                let names: Vec<RoleName> = self.expert_roles.iter().map(|r| r.name).collect();
                if names != RoleName::EXPERTS {
                    return bad(format!(
                        "{mode} needs the experts code_analyst, security_expert, debug_expert in that order"
                    ));
                }
                if mode.uses_verifier() != self.verifier_enabled() {
                    return bad(format!(
                        "{mode} {} a verifier",
                        if mode.uses_verifier() {
                            "requires"
                        } else {
                            "forbids"
                        }
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Backends bound to billing terms, one for experts and one for the verifier.
#[derive(Debug, Clone)]
pub struct Providers {
    pub expert: Provider,
    pub verifier: Provider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCall {
    pub role: RoleName,
    pub model: String,
    pub backend: Option<BackendKind>,
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_seconds: f64,
    pub cost_dollars: f64,
    pub local: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub prediction: Prediction,
    /// Experts in fixed role order, then the verifier if it ran.
    pub calls: Vec<AgentCall>,
    pub expert_wall_seconds: f64,
    pub verifier_wall_seconds: f64,
    pub total_wall_seconds: f64,
    pub api_cost_dollars: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: RunConfig,
    pub results: Vec<SampleResult>,
    pub wall_seconds: f64,
}

impl ExperimentResult {
    pub fn predictions(&self) -> Vec<Prediction> {
        self.results.iter().map(|r| r.prediction.clone()).collect()
    }

    pub fn total_cost(&self) -> f64 {
        self.results.iter().map(|r| r.api_cost_dollars).sum()
    }

    pub fn total_expert_wall(&self) -> f64 {
        self.results.iter().map(|r| r.expert_wall_seconds).sum()
    }

    pub fn failure_count(&self) -> usize {
        self.results.iter().map(|r| r.failures.len()).sum()
    }

    pub fn ledger(&self) -> Vec<LedgerRecord> {
        self.results
            .iter()
            .map(|r| LedgerRecord::from_result(self.config.mode, r))
            .collect()
    }

    /// Write `predictions.jsonl` and `ledger.jsonl` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<(), OrchestratorError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        write_predictions(&dir.join("predictions.jsonl"), &self.predictions())?;
        write_ledger(&dir.join("ledger.jsonl"), &self.ledger())
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> OrchestratorError {
    OrchestratorError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub struct Orchestrator {
    config: RunConfig,
    providers: Providers,
}

impl Orchestrator {
    pub fn new(config: RunConfig, providers: Providers) -> Result<Self, OrchestratorError> {
        config.validate()?;
        Ok(Orchestrator { config, providers })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    fn call(
        &self,
        role: &AgentRole,
        provider: &Provider,
        request: &CompletionRequest,
    ) -> AgentCall {
        let started = Instant::now();
        match provider.complete(request) {
            Ok(result) => AgentCall {
                role: role.name,
                model: role.model.clone(),
                backend: Some(result.backend),
                cost_dollars: provider.cost_of(&result),
                text: result.text,
                input_tokens: result.input_tokens,
                output_tokens: result.output_tokens,
                latency_seconds: result.latency_seconds,
                local: provider.local,
                error: None,
            },
            Err(e) => AgentCall {
                role: role.name,
                model: role.model.clone(),
                backend: None,
                text: String::new(),
                input_tokens: 0,
                output_tokens: 0,
                latency_seconds: started.elapsed().as_secs_f64(),
                cost_dollars: 0.0,
                local: provider.local,
                error: Some(e.to_string()),
            },
        }
    }

    fn expert_phase(&self, sample: &Sample) -> Result<Vec<AgentCall>, OrchestratorError> {
        let requests = self
            .config
            .expert_roles
            .iter()
            .map(|r| agents::expert_request(r, sample))
            .collect::<Result<Vec<_>, _>>()?;
        let provider = &self.providers.expert;
        let pairs = self.config.expert_roles.iter().zip(&requests);
        if self.config.mode.is_parallel() {
            Ok(thread::scope(|scope| {
                let handles: Vec<_> = pairs
                    .map(|(role, req)| scope.spawn(move || self.call(role, provider, req)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("expert call panicked"))
                    .collect()
            }))
        } else {
            Ok(pairs
                .map(|(role, req)| self.call(role, provider, req))
                .collect())
        }
    }

    /// Analyze one sample. Only configuration problems are errors; agent
    /// failures are recorded in the result.
    pub fn run_sample(&self, sample: &Sample) -> Result<SampleResult, OrchestratorError> {
        let started = Instant::now();
        let mut failures = Vec::new();

        let expert_started = Instant::now();
        let mut calls = self.expert_phase(sample)?;
        let expert_wall_seconds = expert_started.elapsed().as_secs_f64();

        let reports: Vec<ExpertReport> = calls
            .iter()
            .map(|c| {
                if let Some(e) = &c.error {
                    log::warn!(
                        "{}: {} failed, treating report as empty: {e}",
                        sample.id,
                        c.role
                    );
                    failures.push(format!("{}: {e}", c.role));
                    ExpertReport::missing()
                } else {
                    parse_expert_report(&c.text)
                }
            })
            .collect();

        let mut verifier_wall_seconds = 0.0;
        let mut verdict = None;
        if let Some(role) = &self.config.verifier {
            let texts: Vec<&str> = calls.iter().map(|c| c.text.as_str()).collect();
            let request = agents::verifier_request(role, sample, &texts)?;
            let verifier_started = Instant::now();
            let call = self.call(role, &self.providers.verifier, &request);
            verifier_wall_seconds = verifier_started.elapsed().as_secs_f64();
            match &call.error {
                Some(e) => {
                    log::warn!(
                        "{}: verifier failed, falling back to majority vote: {e}",
                        sample.id
                    );
                    failures.push(format!("verifier: {e}"));
                }
                None => verdict = Some(parse_verifier_verdict(&call.text)),
            }
            calls.push(call);
        }

        let ruling = decide(&reports, verdict.as_ref(), self.config.vote_rule)
            .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        let mut prediction = ruling.into_prediction(sample.id.clone());
        prediction.raw = calls
            .iter()
            .map(|c| (c.role.as_str().to_string(), c.text.clone()))
            .collect::<BTreeMap<_, _>>();

        Ok(SampleResult {
            prediction,
            api_cost_dollars: calls.iter().map(|c| c.cost_dollars).sum(),
            calls,
            expert_wall_seconds,
            verifier_wall_seconds,
            total_wall_seconds: started.elapsed().as_secs_f64(),
            failures,
        })
    }

    /// Run every sample with up to `sample_concurrency` in flight. Results
    /// come back in manifest order.
    pub fn run_experiment(
        &self,
        manifest: &Manifest,
    ) -> Result<ExperimentResult, OrchestratorError> {
        if manifest.is_empty() {
            return Err(OrchestratorError::EmptyManifest);
        }
        let started = Instant::now();
        let samples = manifest.samples();
        let slots: Mutex<Vec<Option<SampleResult>>> = Mutex::new(vec![None; samples.len()]);
        let next = AtomicUsize::new(0);
        let first_error: Mutex<Option<OrchestratorError>> = Mutex::new(None);
        let workers = self.config.sample_concurrency.min(samples.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= samples.len() || first_error.lock().unwrap().is_some() {
                        break;
                    }
                    match self.run_sample(&samples[i]) {
                        Ok(r) => slots.lock().unwrap()[i] = Some(r),
                        Err(e) => {
                            first_error.lock().unwrap().get_or_insert(e);
                        }
                    }
                });
            }
        });
        if let Some(e) = first_error.into_inner().unwrap() {
            return Err(e);
        }
        let results = slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|r| r.expect("every sample processed"))
            .collect();
        Ok(ExperimentResult {
            config: self.config.clone(),
            results,
            wall_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: RoleName,
    pub model: String,
    #[serde(default)]
    pub backend: Option<BackendKind>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_seconds: f64,
    pub cost_dollars: f64,
    pub local: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One line of the run ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub sample_id: String,
    pub mode: Mode,
    pub expert_wall_seconds: f64,
    pub verifier_wall_seconds: f64,
    pub total_wall_seconds: f64,
    pub api_cost_dollars: f64,
    pub calls: Vec<CallRecord>,
    #[serde(default)]
    pub failures: Vec<String>,
}

impl LedgerRecord {
    pub fn from_result(mode: Mode, r: &SampleResult) -> Self {
        LedgerRecord {
            sample_id: r.prediction.sample_id.clone(),
            mode,
            expert_wall_seconds: r.expert_wall_seconds,
            verifier_wall_seconds: r.verifier_wall_seconds,
            total_wall_seconds: r.total_wall_seconds,
            api_cost_dollars: r.api_cost_dollars,
            calls: r
                .calls
                .iter()
                .map(|c| CallRecord {
                    role: c.role,
                    model: c.model.clone(),
                    backend: c.backend,
                    input_tokens: c.input_tokens,
                    output_tokens: c.output_tokens,
                    latency_seconds: c.latency_seconds,
                    cost_dollars: c.cost_dollars,
                    local: c.local,
                    error: c.error.clone(),
                })
                .collect(),
            failures: r.failures.clone(),
        }
    }
}

pub fn write_ledger(path: &Path, records: &[LedgerRecord]) -> Result<(), OrchestratorError> {
    let mut w = BufWriter::new(fs::File::create(path).map_err(|e| io_error(path, e))?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_error(path, e))?;
        w.write_all(b"\n").map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRecord>, OrchestratorError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| io_error(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Prices used to re-bill a ledger from its token counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Repricing {
    pub expert: PricingModel,
    pub verifier: PricingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleCost {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_dollars: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub samples: usize,
    pub total_cost_dollars: f64,
    pub cost_per_sample: f64,
    pub mean_expert_wall_seconds: f64,
    pub mean_verifier_wall_seconds: f64,
    pub mean_total_wall_seconds: f64,
    pub by_role: BTreeMap<RoleName, RoleCost>,
    pub failures: usize,
}

/// Aggregate a ledger. With `repricing`, costs are recomputed from token
/// counts; local calls are always free.
pub fn cost_report(records: &[LedgerRecord], repricing: Option<&Repricing>) -> CostReport {
    let mut by_role: BTreeMap<RoleName, RoleCost> = BTreeMap::new();
    let mut total = 0.0;
    for call in records.iter().flat_map(|r| &r.calls) {
        let dollars = match (call.local, repricing) {
            (true, _) => 0.0,
            (false, None) => call.cost_dollars,
            (false, Some(p)) => {
                let pricing = if call.role == RoleName::Verifier {
                    &p.verifier
                } else {
                    &p.expert
                };
                cost(call.input_tokens, call.output_tokens, pricing)
            }
        };
        total += dollars;
        let entry = by_role.entry(call.role).or_insert(RoleCost {
            calls: 0,
            input_tokens: 0,
            output_tokens: 0,
            cost_dollars: 0.0,
        });
        entry.calls += 1;
        entry.input_tokens += call.input_tokens;
        entry.output_tokens += call.output_tokens;
        entry.cost_dollars += dollars;
    }
    let n = records.len();
    let mean = |f: fn(&LedgerRecord) -> f64| {
        if n == 0 {
            0.0
        } else {
            records.iter().map(f).sum::<f64>() / n as f64
        }
    };
    CostReport {
        samples: n,
        total_cost_dollars: total,
        cost_per_sample: if n == 0 { 0.0 } else { total / n as f64 },
        mean_expert_wall_seconds: mean(|r| r.expert_wall_seconds),
        mean_verifier_wall_seconds: mean(|r| r.verifier_wall_seconds),
        mean_total_wall_seconds: mean(|r| r.total_wall_seconds),
        by_role,
        failures: records.iter().map(|r| r.failures.len()).sum(),
    }
}
