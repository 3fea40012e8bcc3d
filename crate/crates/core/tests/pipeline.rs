mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use hetvd_core::corpus::Manifest;
use hetvd_core::orchestrator::{Mode, Orchestrator, Providers, RunConfig};
use hetvd_core::provider::{
    BackendKind, CompletionBackend, CompletionRequest, HttpBackend, HttpConfig, PricingModel,
    Provider, ProviderError, ReplayBackend, ResponseCache,
};

fn run(manifest: &Manifest, providers: Providers) -> hetvd_core::orchestrator::ExperimentResult {
    Orchestrator::new(RunConfig::for_mode(Mode::ParallelV), providers)
        .unwrap()
        .run_experiment(manifest)
        .unwrap()
}

fn recording_providers(cache: &ResponseCache, upstream: Arc<dyn CompletionBackend>) -> Providers {
    let backend = Arc::new(ReplayBackend::recording(cache.clone(), upstream));
    Providers {
        expert: Provider::new(backend.clone(), PricingModel::DEEPSEEK_V3),
        verifier: Provider::local(backend),
    }
}

#[test]
fn interrupted_run_resumes_from_the_cache() {
    let manifest = common::synthetic_manifest(9);
    let head = Manifest::new(manifest.samples()[..4].to_vec()).unwrap();

    let reference = run(
        &manifest,
        common::providers(Arc::new(common::scripted_backend(Duration::ZERO))),
    );

    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let first = Arc::new(common::scripted_backend(Duration::ZERO));
    run(&head, recording_providers(&cache, first.clone()));
    assert_eq!(first.call_count(), 4 * 4);

    let second = Arc::new(common::scripted_backend(Duration::ZERO));
    let resumed = run(&manifest, recording_providers(&cache, second.clone()));
    assert_eq!(
        second.call_count(),
        5 * 4,
        "cached samples must not be re-queried"
    );

    assert_eq!(resumed.predictions(), reference.predictions());
    for (a, b) in resumed.ledger().iter().zip(reference.ledger()) {
        assert_eq!(a.sample_id, b.sample_id);
        assert_eq!(a.api_cost_dollars, b.api_cost_dollars);
        assert_eq!(a.failures, b.failures);
        let tokens = |r: &hetvd_core::orchestrator::LedgerRecord| {
            r.calls
                .iter()
                .map(|c| (c.role, c.input_tokens, c.output_tokens))
                .collect::<Vec<_>>()
        };
        assert_eq!(tokens(a), tokens(&b));
    }
}

#[test]
fn replay_only_run_is_deterministic_and_offline() {
    let manifest = common::synthetic_manifest(6);
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let recorded = run(
        &manifest,
        recording_providers(&cache, Arc::new(common::scripted_backend(Duration::ZERO))),
    );

    let replay = Arc::new(ReplayBackend::replay_only(cache));
    let providers = Providers {
        expert: Provider::new(replay.clone(), PricingModel::DEEPSEEK_V3),
        verifier: Provider::local(replay),
    };
    let a = run(&manifest, providers.clone());
    let b = run(&manifest, providers);
    assert_eq!(a.predictions(), recorded.predictions());
    assert_eq!(a.predictions(), b.predictions());
    assert!(a
        .results
        .iter()
        .flat_map(|r| &r.calls)
        .all(|c| c.backend == Some(BackendKind::Replay)));
}

#[test]
fn replay_miss_is_a_recorded_failure() {
    let manifest = common::synthetic_manifest(1);
    let dir = tempfile::tempdir().unwrap();
    let replay = Arc::new(ReplayBackend::replay_only(
        ResponseCache::open(dir.path()).unwrap(),
    ));
    let result = run(
        &manifest,
        Providers {
            expert: Provider::new(replay.clone(), PricingModel::DEEPSEEK_V3),
            verifier: Provider::local(replay),
        },
    );
    assert_eq!(result.failure_count(), 4);
    assert!(!result.predictions()[0].predicted_vulnerable);
}

/// Minimal HTTP server answering each connection with the next scripted
/// (status, body) pair. Returns the endpoint URL and a hit counter.
fn stub_server(replies: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else {
                return;
            };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
            let mut request_body = vec![0; length];
            let _ = reader.read_exact(&mut request_body);
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (url, hits)
}

fn ok_body() -> String {
    r#"{"choices":[{"message":{"role":"assistant","content":"VULNERABILITY_FOUND: no"}}],"usage":{"prompt_tokens":592,"completion_tokens":482}}"#.into()
}

fn backend(url: &str, retries: u32) -> HttpBackend {
    let mut config = HttpConfig::new(url);
    config.api_key = Some("test-key".into());
    config.max_retries = retries;
    config.backoff = Duration::from_millis(5);
    config.timeout = Duration::from_secs(5);
    HttpBackend::new(config).unwrap()
}

fn request() -> CompletionRequest {
    CompletionRequest {
        model: "deepseek-chat".into(),
        system_prompt: "system".into(),
        user_prompt: "user".into(),
        temperature: 0.1,
        max_tokens: 64,
    }
}

#[test]
fn http_backend_retries_transient_statuses() {
    let (url, hits) = stub_server(vec![
        (503, "busy".into()),
        (429, "slow down".into()),
        (200, ok_body()),
    ]);
    let result = backend(&url, 3).complete(&request()).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    assert_eq!(result.text, "VULNERABILITY_FOUND: no");
    assert_eq!((result.input_tokens, result.output_tokens), (592, 482));
    assert_eq!(result.backend, BackendKind::Http);
}

#[test]
fn http_backend_gives_up_after_the_retry_budget() {
    let (url, hits) = stub_server(vec![
        (500, "a".into()),
        (500, "b".into()),
        (500, "c".into()),
    ]);
    let err = backend(&url, 2).complete(&request()).unwrap_err();
    assert!(
        matches!(err, ProviderError::Transport { attempts: 3, .. }),
        "{err}"
    );
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn http_client_errors_are_not_retried() {
    let (url, hits) = stub_server(vec![(401, "bad key".into()), (200, ok_body())]);
    let err = backend(&url, 3).complete(&request()).unwrap_err();
    assert!(
        matches!(err, ProviderError::Status { status: 401, .. }),
        "{err}"
    );
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}
