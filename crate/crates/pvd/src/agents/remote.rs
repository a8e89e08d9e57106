//! Remote chat-completions client.
//!
//! Speaks the ubiquitous `POST {base_url}/chat/completions` JSON shape.
//! Credentials come from an environment variable named in the config and are
//! never serialized or printed; retries are bounded exponential backoff on
//! transport errors, 429, and 5xx. Auth failures never retry.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Agent, AgentError, AgentMessage, CallCtx, Completion, Role, UsageRecord};

/// Bounded exponential backoff schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt (0 = single shot).
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 4, initial_backoff_ms: 250, max_backoff_ms: 8_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry `attempt` (1-based): doubles from the initial value,
    /// capped.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Per-token prices in cents. Cost of a call is the dot product with its
/// token counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenPrices {
    pub input_cents_per_token: f64,
    pub output_cents_per_token: f64,
}

impl TokenPrices {
    pub fn cost_cents(&self, input_tokens: u64, output_tokens: u64) -> f64 {
        input_tokens as f64 * self.input_cents_per_token
            + output_tokens as f64 * self.output_cents_per_token
    }
}

/// Everything needed to talk to one endpoint/model pair. Serializing this
/// stores the credential variable *name*, never its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<TokenPrices>,
}

fn default_timeout_s() -> u64 {
    120
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize, Default)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Chat-completions agent. The key is resolved from the environment once, at
/// construction; `Debug` never shows it.
pub struct RemoteAgent {
    config: EndpointConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for RemoteAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteAgent")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

impl RemoteAgent {
    pub fn new(config: EndpointConfig) -> Result<Self, AgentError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| AgentError::MissingCredential { var: config.api_key_env.clone() })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| AgentError::Transport {
                endpoint: config.base_url.clone(),
                detail: format!("client construction failed: {e}"),
            })?;
        Ok(Self { config, api_key, client })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn send_once(&self, body: &serde_json::Value) -> Result<Completion, SendFailure> {
        let response = self
            .client
            .post(self.url())
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| SendFailure::Retryable(format!("request failed: {e}")))?;

        let status = response.status();
        log::debug!("POST {} -> {}", self.url(), status);
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(SendFailure::Auth(format!("status {status}")));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(SendFailure::Retryable(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(SendFailure::Fatal(format!("unexpected status {status}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| SendFailure::Fatal(format!("malformed response body: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| SendFailure::Fatal("response carried no choices".into()))?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(Completion {
            text: choice.message.content,
            usage: UsageRecord {
                input_tokens: usage.prompt_tokens,
                output_tokens: usage.completion_tokens,
                cost_cents: self
                    .config
                    .prices
                    .map(|p| p.cost_cents(usage.prompt_tokens, usage.completion_tokens)),
                latency_ms: 0,
            },
        })
    }
}

enum SendFailure {
    Retryable(String),
    Auth(String),
    Fatal(String),
}

impl Agent for RemoteAgent {
    fn complete(
        &self,
        _ctx: &CallCtx<'_>,
        messages: &[AgentMessage],
    ) -> Result<Completion, AgentError> {
        let rendered: Vec<_> = messages
            .iter()
            .map(|m| json!({"role": role_name(m.role), "content": m.content}))
            .collect();
        let mut body = json!({
            "model": self.config.model,
            "messages": rendered,
            "temperature": self.config.temperature,
        });
        if let Some(max_tokens) = self.config.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }

        let started = Instant::now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.send_once(&body) {
                Ok(mut completion) => {
                    completion.usage.latency_ms = started.elapsed().as_millis() as u64;
                    return Ok(completion);
                }
                Err(SendFailure::Auth(detail)) => {
                    return Err(AgentError::Auth { endpoint: self.config.base_url.clone(), detail })
                }
                Err(SendFailure::Fatal(detail)) => {
                    return Err(AgentError::Transport {
                        endpoint: self.config.base_url.clone(),
                        detail,
                    })
                }
                Err(SendFailure::Retryable(detail)) => {
                    if attempt > self.config.retry.max_retries {
                        return Err(AgentError::Transport {
                            endpoint: self.config.base_url.clone(),
                            detail: format!("{detail} (after {attempt} attempts)"),
                        });
                    }
                    let delay = self.config.retry.backoff(attempt);
                    log::debug!(
                        "retrying {} in {}ms after: {detail}",
                        self.config.base_url,
                        delay.as_millis()
                    );
                    std::thread::sleep(delay);
                }
            }
        }
    }

    fn name(&self) -> &str {
        &self.config.model
    }
}
