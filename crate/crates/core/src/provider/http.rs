//! OpenAI-compatible chat-completions client.

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BackendKind, CompletionBackend, CompletionRequest, CompletionResult, ProviderError};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full chat-completions URL, e.g. `https://api.deepseek.com/chat/completions`.
    pub endpoint: String,
    /// Bearer token; omitted from the request when `None` (local servers).
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Retries after the first failed attempt.
    pub max_retries: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff: Duration,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            max_retries: 3,
            backoff: Duration::from_secs(1),
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    config: HttpConfig,
}

enum Attempt {
    Retry(String),
    Fatal(ProviderError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpBackend { client, config })
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<String, Attempt> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = self.config.api_key.as_deref().filter(|k| !k.is_empty()) {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!(
                "HTTP {}: {}",
                status.as_u16(),
                text
            )));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(ProviderError::Status {
                status: status.as_u16(),
                body: text,
            }));
        }
        Ok(text)
    }
}

/// Parse a chat-completions response body into (content, input, output).
pub(crate) fn parse_response(body: &str) -> Result<(String, u64, u64), ProviderError> {
    let parsed: ChatResponse =
        serde_json::from_str(body).map_err(|e| ProviderError::Protocol(e.to_string()))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ProviderError::Protocol("response has no choices".into()))?;
    let content = choice
        .message
        .content
        .ok_or_else(|| ProviderError::Protocol("first choice has no message content".into()))?;
    let usage = parsed
        .usage
        .ok_or_else(|| ProviderError::Protocol("response has no usage block".into()))?;
    Ok((content, usage.prompt_tokens, usage.completion_tokens))
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        let body = ChatRequest {
            model: &request.model,
            messages: [
                ChatMessage {
                    role: "system",
                    content: &request.system_prompt,
                },
                ChatMessage {
                    role: "user",
                    content: &request.user_prompt,
                },
            ],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => {
                    let (content, input_tokens, output_tokens) = parse_response(&text)?;
                    return Ok(CompletionResult {
                        text: content,
                        input_tokens,
                        output_tokens,
                        latency_seconds: started.elapsed().as_secs_f64(),
                        backend: BackendKind::Http,
                    });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    if attempts > self.config.max_retries {
                        return Err(ProviderError::Transport { attempts, message });
                    }
                    let delay = self.config.backoff * 2u32.pow(attempts - 1);
                    log::warn!(
                        "attempt {attempts} to {} failed ({message}); retrying in {delay:?}",
                        self.config.endpoint
                    );
                    thread::sleep(delay);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_first_choice_and_usage() {
        let body = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"VULNERABILITY_FOUND: no"}},{"index":1,"message":{"role":"assistant","content":"other"}}],"usage":{"prompt_tokens":592,"completion_tokens":482,"total_tokens":1074}}"#;
        let (text, i, o) = parse_response(body).unwrap();
        assert_eq!(text, "VULNERABILITY_FOUND: no");
        assert_eq!((i, o), (592, 482));
    }

    #[test]
    fn malformed_bodies_are_protocol_errors() {
        for body in [
            "not json",
            r#"{"choices":[]}"#,
            r#"{"choices":[{"message":{"content":"x"}}]}"#,
            r#"{"choices":[{"message":{}}],"usage":{"prompt_tokens":1,"completion_tokens":1}}"#,
        ] {
            assert!(
                matches!(parse_response(body), Err(ProviderError::Protocol(_))),
                "{body}"
            );
        }
    }
}
