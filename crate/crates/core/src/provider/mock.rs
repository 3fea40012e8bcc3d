//! Scripted backend for offline runs and tests.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    content_key, BackendKind, CompletionBackend, CompletionRequest, CompletionResult, ProviderError,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockReply {
    pub text: String,
    #[serde(default)]
    pub input_tokens: u64,
    #[serde(default)]
    pub output_tokens: u64,
    /// Injected latency in milliseconds.
    #[serde(default)]
    pub latency_ms: u64,
}

impl MockReply {
    pub fn text(text: impl Into<String>) -> Self {
        MockReply {
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn tokens(mut self, input: u64, output: u64) -> Self {
        self.input_tokens = input;
        self.output_tokens = output;
        self
    }

    pub fn latency(mut self, latency: Duration) -> Self {
        self.latency_ms = latency.as_millis() as u64;
        self
    }
}

/// Matches when every present substring occurs in the respective prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default)]
    pub system_contains: Option<String>,
    #[serde(default)]
    pub user_contains: Option<String>,
    pub reply: MockReply,
}

impl MockRule {
    fn matches(&self, request: &CompletionRequest) -> bool {
        self.system_contains
            .as_deref()
            .is_none_or(|s| request.system_prompt.contains(s))
            && self
                .user_contains
                .as_deref()
                .is_none_or(|s| request.user_prompt.contains(s))
    }
}

/// On-disk mock script. Lookup order: exact content key, first matching
/// rule, default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub by_key: HashMap<String, MockReply>,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: Option<MockReply>,
}

type Responder = dyn Fn(&CompletionRequest) -> Option<MockReply> + Send + Sync;

pub struct MockBackend {
    script: MockScript,
    responder: Option<Box<Responder>>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn from_script(script: MockScript) -> Self {
        MockBackend {
            script,
            responder: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_default(reply: MockReply) -> Self {
        Self::from_script(MockScript {
            default: Some(reply),
            ..Default::default()
        })
    }

    /// Replies computed from the request; consulted before the script.
    pub fn with_responder(
        responder: impl Fn(&CompletionRequest) -> Option<MockReply> + Send + Sync + 'static,
    ) -> Self {
        MockBackend {
            script: MockScript::default(),
            responder: Some(Box::new(responder)),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn insert_key(&mut self, request: &CompletionRequest, reply: MockReply) {
        self.script.by_key.insert(content_key(request), reply);
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn lookup(&self, request: &CompletionRequest) -> Option<MockReply> {
        if let Some(reply) = self.responder.as_ref().and_then(|r| r(request)) {
            return Some(reply);
        }
        if !self.script.by_key.is_empty() {
            if let Some(reply) = self.script.by_key.get(&content_key(request)) {
                return Some(reply.clone());
            }
        }
        self.script
            .rules
            .iter()
            .find(|rule| rule.matches(request))
            .map(|rule| rule.reply.clone())
            .or_else(|| self.script.default.clone())
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let reply = self
            .lookup(request)
            .ok_or_else(|| ProviderError::Unscripted {
                key: content_key(request),
            })?;
        if reply.latency_ms > 0 {
            thread::sleep(Duration::from_millis(reply.latency_ms));
        }
        Ok(CompletionResult {
            text: reply.text,
            input_tokens: reply.input_tokens,
            output_tokens: reply.output_tokens,
            latency_seconds: started.elapsed().as_secs_f64(),
            backend: BackendKind::Mock,
        })
    }
}
