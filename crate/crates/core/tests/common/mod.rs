#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use hetvd_core::corpus::{Label, Manifest, Sample};
use hetvd_core::extraction::{read_predictions, Prediction};
use hetvd_core::orchestrator::Providers;
use hetvd_core::provider::{MockBackend, MockReply, PricingModel, Provider};
use hetvd_core::Cwe;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_manifest() -> Manifest {
    Manifest::load(&fixtures().join("golden/manifest.jsonl")).unwrap()
}

pub fn golden(name: &str) -> Vec<Prediction> {
    read_predictions(&fixtures().join(format!("golden/{name}.jsonl"))).unwrap()
}

/// `n` samples cycling through three kinds: a real overflow (`strcpy`), a
/// bounded copy that experts over-report (`strncpy`) and plain code.
pub fn synthetic_manifest(n: usize) -> Manifest {
    let samples = (0..n)
        .map(|i| {
            let (label, body) = match i % 3 {
                0 => (
                    Label::Vulnerable,
                    format!("char b[4];\n    strcpy(b, \"overflow{i}\");"),
                ),
                1 => (
                    Label::Benign,
                    format!("char b[16];\n    strncpy(b, \"ok{i}\", 15);"),
                ),
                _ => (Label::Benign, format!("int x = {i};\n    (void)x;")),
            };
            Sample::new(
                format!(
                    "synthetic_{i:02}#{}",
                    if label == Label::Vulnerable {
                        "bad"
                    } else {
                        "good"
                    }
                ),
                Cwe::new(121).unwrap(),
                label,
                format!("void function_1(void)\n{{\n    {body}\n}}\n"),
                format!("synthetic_{i:02}.c"),
            )
        })
        .collect();
    Manifest::new(samples).unwrap()
}

const YES_121: &str = "VULNERABILITY_FOUND: yes\nCWE_IDs: [CWE-121]\nSEVERITY: high\nEVIDENCE: unbounded copy\nCONFIDENCE: high";
const NO: &str =
    "VULNERABILITY_FOUND: no\nCWE_IDs: []\nSEVERITY: none\nEVIDENCE: none\nCONFIDENCE: medium";

/// Content-driven replies; experts sleep `expert_latency`, the verifier
/// answers immediately.
pub fn scripted_backend(expert_latency: Duration) -> MockBackend {
    MockBackend::with_responder(move |req| {
        let code = &req.user_prompt;
        if req
            .system_prompt
            .contains("adversarial code security reviewer")
        {
            let code_part = code.split("=== Report 1").next().unwrap_or("");
            let text = if code_part.contains("strcpy(") {
                "DECISION: ACCEPT\nFINAL_VULNERABILITY: yes\nFINAL_CWE_IDS: CWE-121\nAGREEMENT_LEVEL: full\nREASONING: overflow confirmed"
            } else if code_part.contains("strncpy(") {
                "DECISION: REJECT\nFINAL_VULNERABILITY: no\nFINAL_CWE_IDS: none\nAGREEMENT_LEVEL: partial\nREASONING: copy is bounded"
            } else {
                "DECISION: ACCEPT\nFINAL_VULNERABILITY: no\nAGREEMENT_LEVEL: full\nREASONING: nothing found"
            };
            return Some(MockReply::text(text).tokens(1500, 300));
        }
        let is_code_analyst = req
            .system_prompt
            .starts_with("You are a senior code structure analyst");
        let text = if code.contains("strcpy(") || (code.contains("strncpy(") && !is_code_analyst) {
            YES_121
        } else {
            NO
        };
        Some(
            MockReply::text(text)
                .tokens(592, 482)
                .latency(expert_latency),
        )
    })
}

pub fn providers(backend: Arc<MockBackend>) -> Providers {
    Providers {
        expert: Provider::new(backend.clone(), PricingModel::DEEPSEEK_V3),
        verifier: Provider::local(backend),
    }
}
