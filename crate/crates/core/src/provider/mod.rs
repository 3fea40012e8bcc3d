//! Chat-completion access shared by every agent.
//!
//! Three interchangeable backends implement [`CompletionBackend`]:
//! [`HttpBackend`] talks to an OpenAI-compatible endpoint, [`ReplayBackend`]
//! serves results from a content-addressed cache (optionally recording
//! misses from an upstream backend), and [`MockBackend`] returns scripted
//! text. A [`Provider`] pairs a backend with its pricing so calls can be
//! billed.

mod http;
mod mock;
mod replay;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use http::{HttpBackend, HttpConfig};
pub use mock::{MockBackend, MockReply, MockRule, MockScript};
pub use replay::{CacheEntry, ReplayBackend, ResponseCache};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("uncached request {key} (replay mode never goes to the network)")]
    Uncached { key: String },
    #[error("cache error at {path}: {message}")]
    Cache { path: String, message: String },
    #[error("mock script has no reply for request {key}")]
    Unscripted { key: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(ProviderError::InvalidRequest(
                "prompts must be non-empty".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    /// See [`content_key`].
    pub fn content_key(&self) -> String {
        content_key(self)
    }
}

/// Stable SHA-256 digest (hex) over every field of the request.
///
/// Fields are hashed as a JSON array so no two distinct requests can share
/// a byte encoding.
pub fn content_key(request: &CompletionRequest) -> String {
    let canonical = serde_json::json!([
        request.model,
        request.system_prompt,
        request.user_prompt,
        request.temperature,
        request.max_tokens,
    ]);
    let mut hasher = Sha256::new();
    hasher.update(canonical.to_string().as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Replay,
    Mock,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Http => "http",
            BackendKind::Replay => "replay",
            BackendKind::Mock => "mock",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_seconds: f64,
    pub backend: BackendKind,
}

impl CompletionResult {
    pub fn total_tokens(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError>;
}

/// Token prices in dollars per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingModel {
    pub input_rate: f64,
    pub output_rate: f64,
}

impl PricingModel {
    /// DeepSeek-V3 list price: $0.27/MTok input, $1.10/MTok output.
    pub const DEEPSEEK_V3: PricingModel = PricingModel {
        input_rate: 0.27,
        output_rate: 1.10,
    };

    pub const FREE: PricingModel = PricingModel {
        input_rate: 0.0,
        output_rate: 0.0,
    };

    pub fn new(input_rate: f64, output_rate: f64) -> Result<Self, ProviderError> {
        if input_rate < 0.0
            || output_rate < 0.0
            || !input_rate.is_finite()
            || !output_rate.is_finite()
        {
            return Err(ProviderError::InvalidRequest(
                "rates must be finite and >= 0".into(),
            ));
        }
        Ok(PricingModel {
            input_rate,
            output_rate,
        })
    }
}

/// Dollar cost of one call.
pub fn cost(input_tokens: u64, output_tokens: u64, pricing: &PricingModel) -> f64 {
    (input_tokens as f64 * pricing.input_rate + output_tokens as f64 * pricing.output_rate) / 1e6
}

/// A backend bound to its billing terms. Local providers always cost $0.
#[derive(Clone)]
pub struct Provider {
    pub backend: std::sync::Arc<dyn CompletionBackend>,
    pub pricing: PricingModel,
    pub local: bool,
}

impl Provider {
    pub fn new(backend: std::sync::Arc<dyn CompletionBackend>, pricing: PricingModel) -> Self {
        Provider {
            backend,
            pricing,
            local: false,
        }
    }

    pub fn local(backend: std::sync::Arc<dyn CompletionBackend>) -> Self {
        Provider {
            backend,
            pricing: PricingModel::FREE,
            local: true,
        }
    }

    pub fn cost_of(&self, result: &CompletionResult) -> f64 {
        if self.local {
            0.0
        } else {
            cost(result.input_tokens, result.output_tokens, &self.pricing)
        }
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        request.validate()?;
        self.backend.complete(request)
    }
}

impl fmt::Debug for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Provider")
            .field("pricing", &self.pricing)
            .field("local", &self.local)
            .finish_non_exhaustive()
    }
}
