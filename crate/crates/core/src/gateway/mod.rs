//! Provider-agnostic chat-completion client.
//!
//! Every provider is adapted to the same shape: an ordered list of
//! system/user/assistant messages in, a text completion out. The
//! [`Gateway`] owns one rate limiter per provider, retries transient
//! failures with exponential backoff, and records every attempt into a
//! [`TranscriptSink`] with credentials scrubbed.

mod http;
mod limiter;
mod mock;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{AnthropicProvider, OpenAiCompatibleProvider};
pub use limiter::{Permit, RateLimiter};
pub use mock::{MockProvider, MockStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

impl MessageRole {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageRole::System => "system",
            MessageRole::User => "user",
            MessageRole::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub provider: String,
    pub model: String,
    pub messages: Vec<ChatMessage>,
    /// `None` leaves the provider's default temperature in effect.
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout: Duration,
}

impl ChatRequest {
    pub fn new(
        provider: impl Into<String>,
        model: impl Into<String>,
        messages: Vec<ChatMessage>,
    ) -> Self {
        ChatRequest {
            provider: provider.into(),
            model: model.into(),
            messages,
            temperature: None,
            max_tokens: None,
            timeout: Duration::from_secs(120),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.messages.is_empty() {
            return Err("request has no messages".into());
        }
        if self
            .messages
            .iter()
            .skip(1)
            .any(|m| m.role == MessageRole::System)
        {
            return Err("system message must come first".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    pub latency: Duration,
    pub token_usage: Option<TokenUsage>,
    pub raw: serde_json::Value,
    /// Attempts used, including the successful one.
    pub attempts: u32,
}

/// What a provider adapter returns for a single call.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReply {
    pub content: String,
    pub token_usage: Option<TokenUsage>,
    pub raw: serde_json::Value,
}

/// Failure of a single provider call, before retry bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub enum CallError {
    Auth(String),
    Transport(String),
    Status { status: u16, message: String },
}

impl CallError {
    fn retryable(&self) -> bool {
        match self {
            CallError::Auth(_) => false,
            CallError::Transport(_) => true,
            CallError::Status { status, .. } => *status == 429 || *status >= 500,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CallError::Auth(_) => "auth",
            CallError::Transport(_) => "transport",
            CallError::Status { .. } => "provider",
        }
    }

    fn message(&self) -> String {
        match self {
            CallError::Auth(m) | CallError::Transport(m) => m.clone(),
            CallError::Status { status, message } => format!("status {status}: {message}"),
        }
    }
}

/// A chat backend reachable through one wire protocol.
pub trait ChatProvider: Send + Sync {
    fn send(&self, req: &ChatRequest, credential: Option<&str>)
        -> Result<ProviderReply, CallError>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("[{provider}] authentication failed: {message}")]
    Auth {
        provider: String,
        attempts: u32,
        message: String,
    },
    #[error("[{provider}] transport error after {attempts} attempt(s): {message}")]
    Transport {
        provider: String,
        attempts: u32,
        message: String,
    },
    #[error("[{provider}] provider error after {attempts} attempt(s): status {status}: {message}")]
    Provider {
        provider: String,
        attempts: u32,
        status: u16,
        message: String,
    },
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider setup failed: {0}")]
    Setup(String),
}

impl GatewayError {
    pub fn is_auth(&self) -> bool {
        matches!(self, GatewayError::Auth { .. })
    }

    pub fn attempts(&self) -> u32 {
        match self {
            GatewayError::Auth { attempts, .. }
            | GatewayError::Transport { attempts, .. }
            | GatewayError::Provider { attempts, .. } => *attempts,
            _ => 0,
        }
    }

    fn from_call(provider: &str, attempts: u32, err: CallError) -> Self {
        let provider = provider.to_string();
        match err {
            CallError::Auth(message) => GatewayError::Auth {
                provider,
                attempts,
                message,
            },
            CallError::Transport(message) => GatewayError::Transport {
                provider,
                attempts,
                message,
            },
            CallError::Status { status, message } => GatewayError::Provider {
                provider,
                attempts,
                status,
                message,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_backoff: Duration,
    /// Each delay is scaled by a factor drawn from `[1 - jitter, 1 + jitter]`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_backoff: Duration::from_secs(1),
            jitter: 0.1,
        }
    }
}

impl RetryPolicy {
    /// Delay slept after failed attempt number `attempt` (1-based), before jitter.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let exp = attempt.saturating_sub(1).min(30);
        self.base_backoff.saturating_mul(1u32 << exp)
    }

    fn jittered(&self, attempt: u32) -> Duration {
        let base = self.backoff(attempt);
        if self.jitter <= 0.0 {
            return base;
        }
        let j = self.jitter.min(1.0);
        let factor = rand::thread_rng().gen_range(1.0 - j..=1.0 + j);
        base.mul_f64(factor)
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProviderKind {
    OpenaiCompatible,
    Anthropic,
    Mock { script: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub id: String,
    pub kind: ProviderKind,
    #[serde(default)]
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_max_concurrent() -> usize {
    4
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_concurrent < 1 {
            return Err(GatewayError::Setup(format!(
                "{}: max_concurrent must be >= 1",
                self.id
            )));
        }
        if self.retry.max_attempts < 1 {
            return Err(GatewayError::Setup(format!(
                "{}: max_attempts must be >= 1",
                self.id
            )));
        }
        Ok(())
    }

    /// Providers used by the builtin treatments.
    pub fn defaults() -> Vec<ProviderConfig> {
        let http = |id: &str, kind: ProviderKind, url: &str, env: &str| ProviderConfig {
            id: id.into(),
            kind,
            base_url: url.into(),
            credential_env: Some(env.into()),
            max_concurrent: default_max_concurrent(),
            retry: RetryPolicy::default(),
        };
        vec![
            http(
                "openai",
                ProviderKind::OpenaiCompatible,
                "https://api.openai.com/v1",
                "OPENAI_API_KEY",
            ),
            http(
                "anthropic",
                ProviderKind::Anthropic,
                "https://api.anthropic.com/v1",
                "ANTHROPIC_API_KEY",
            ),
            http(
                "google",
                ProviderKind::OpenaiCompatible,
                "https://generativelanguage.googleapis.com/v1beta/openai",
                "GOOGLE_API_KEY",
            ),
            http(
                "local",
                ProviderKind::OpenaiCompatible,
                "http://127.0.0.1:8000/v1",
                "LOCAL_LLM_API_KEY",
            ),
        ]
    }

    /// Reads a JSON list of provider configs.
    pub fn load_list(path: &Path) -> Result<Vec<ProviderConfig>, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Setup(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::Setup(format!("{}: {e}", path.display())))
    }
}

/// One provider call as recorded in a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub timestamp_ms: u64,
    pub provider: String,
    pub model: String,
    pub attempt: u32,
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub outcome: ExchangeOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ExchangeOutcome {
    Response {
        content: String,
        latency_ms: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token_usage: Option<TokenUsage>,
        raw: serde_json::Value,
    },
    Failure {
        kind: String,
        message: String,
    },
}

impl Exchange {
    pub fn content(&self) -> Option<&str> {
        match &self.outcome {
            ExchangeOutcome::Response { content, .. } => Some(content),
            ExchangeOutcome::Failure { .. } => None,
        }
    }
}

/// Append-only, thread-safe collection of exchanges.
#[derive(Debug, Default)]
pub struct TranscriptSink {
    entries: Mutex<Vec<Exchange>>,
}

impl TranscriptSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, exchange: Exchange) {
        self.entries
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(exchange);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<Exchange> {
        self.entries
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    pub fn take(&self) -> Vec<Exchange> {
        std::mem::take(&mut *self.entries.lock().unwrap_or_else(|e| e.into_inner()))
    }
}

/// Blocking pause between retries; injectable so tests can observe delays.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested delays without sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.delays
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(d);
    }
}

struct ProviderSlot {
    config: ProviderConfig,
    backend: Arc<dyn ChatProvider>,
    limiter: RateLimiter,
}

/// Routes chat requests to configured providers.
pub struct Gateway {
    providers: HashMap<String, ProviderSlot>,
    sleeper: Arc<dyn Sleeper>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut ids: Vec<_> = self.providers.keys().collect();
        ids.sort();
        f.debug_struct("Gateway").field("providers", &ids).finish()
    }
}

impl Default for Gateway {
    fn default() -> Self {
        Gateway::new()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Gateway {
            providers: HashMap::new(),
            sleeper: Arc::new(ThreadSleeper),
        }
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    /// Builds a gateway with the adapter matching each config's kind.
    pub fn from_configs(configs: &[ProviderConfig]) -> Result<Self, GatewayError> {
        let mut gw = Gateway::new();
        for cfg in configs {
            let backend: Arc<dyn ChatProvider> = match &cfg.kind {
                ProviderKind::OpenaiCompatible => {
                    Arc::new(OpenAiCompatibleProvider::new(&cfg.base_url)?)
                }
                ProviderKind::Anthropic => Arc::new(AnthropicProvider::new(&cfg.base_url)?),
                ProviderKind::Mock { script } => Arc::new(MockProvider::from_file(script)?),
            };
            gw.register(cfg.clone(), backend)?;
        }
        Ok(gw)
    }

    pub fn register(
        &mut self,
        config: ProviderConfig,
        backend: Arc<dyn ChatProvider>,
    ) -> Result<(), GatewayError> {
        config.validate()?;
        let limiter = RateLimiter::new(config.max_concurrent);
        self.providers.insert(
            config.id.clone(),
            ProviderSlot {
                config,
                backend,
                limiter,
            },
        );
        Ok(())
    }

    pub fn provider_config(&self, id: &str) -> Option<&ProviderConfig> {
        self.providers.get(id).map(|s| &s.config)
    }

    /// Fails if the provider is unknown or its credential variable is unset.
    pub fn check_credentials(&self, provider: &str) -> Result<(), GatewayError> {
        let slot = self
            .providers
            .get(provider)
            .ok_or_else(|| GatewayError::UnknownProvider(provider.into()))?;
        resolve_credential(&slot.config).map(|_| ())
    }

    /// Runs `f` while holding one of the provider's concurrency slots.
    pub fn with_rate_limit<T>(
        &self,
        provider: &str,
        f: impl FnOnce() -> T,
    ) -> Result<T, GatewayError> {
        let slot = self
            .providers
            .get(provider)
            .ok_or_else(|| GatewayError::UnknownProvider(provider.into()))?;
        Ok(slot.limiter.run(f))
    }

    /// Sends `req`, retrying transient failures. Every attempt is appended to `sink`.
    pub fn complete(
        &self,
        req: &ChatRequest,
        sink: &TranscriptSink,
    ) -> Result<ChatResponse, GatewayError> {
        req.validate().map_err(GatewayError::InvalidRequest)?;
        let slot = self
            .providers
            .get(&req.provider)
            .ok_or_else(|| GatewayError::UnknownProvider(req.provider.clone()))?;
        let credential = resolve_credential(&slot.config)?;
        let secret = credential.as_deref().filter(|s| !s.is_empty());
        let policy = &slot.config.retry;

        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = Instant::now();
            let result = slot
                .limiter
                .run(|| slot.backend.send(req, credential.as_deref()));
            let latency = started.elapsed();
            let outcome = match &result {
                Ok(reply) => ExchangeOutcome::Response {
                    content: scrub(&reply.content, secret),
                    latency_ms: latency.as_millis() as u64,
                    token_usage: reply.token_usage,
                    raw: scrub_json(&reply.raw, secret),
                },
                Err(e) => ExchangeOutcome::Failure {
                    kind: e.kind().into(),
                    message: scrub(&e.message(), secret),
                },
            };
            sink.record(Exchange {
                timestamp_ms: now_ms(),
                provider: req.provider.clone(),
                model: req.model.clone(),
                attempt,
                messages: req.messages.clone(),
                temperature: req.temperature,
                max_tokens: req.max_tokens,
                outcome,
            });
            match result {
                Ok(reply) => {
                    return Ok(ChatResponse {
                        content: reply.content,
                        latency,
                        token_usage: reply.token_usage,
                        raw: reply.raw,
                        attempts: attempt,
                    })
                }
                Err(e) if e.retryable() && attempt < policy.max_attempts => {
                    log::warn!(
                        "[{}] attempt {attempt} failed ({}), retrying",
                        req.provider,
                        e.kind()
                    );
                    self.sleeper.sleep(policy.jittered(attempt));
                }
                Err(e) => {
                    let e = match e {
                        CallError::Auth(m) => CallError::Auth(scrub(&m, secret)),
                        CallError::Transport(m) => CallError::Transport(scrub(&m, secret)),
                        CallError::Status { status, message } => CallError::Status {
                            status,
                            message: scrub(&message, secret),
                        },
                    };
                    return Err(GatewayError::from_call(&req.provider, attempt, e));
                }
            }
        }
    }
}

fn resolve_credential(cfg: &ProviderConfig) -> Result<Option<String>, GatewayError> {
    let Some(var) = &cfg.credential_env else {
        return Ok(None);
    };
    match std::env::var(var) {
        Ok(v) if !v.trim().is_empty() => Ok(Some(v)),
        _ => Err(GatewayError::Auth {
            provider: cfg.id.clone(),
            attempts: 0,
            message: format!("environment variable {var} is not set"),
        }),
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

const REDACTED: &str = "[REDACTED]";

fn scrub(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if text.contains(s) => text.replace(s, REDACTED),
        _ => text.to_string(),
    }
}

fn scrub_json(value: &serde_json::Value, secret: Option<&str>) -> serde_json::Value {
    use serde_json::Value;
    let Some(_) = secret else {
        return value.clone();
    };
    match value {
        Value::String(s) => Value::String(scrub(s, secret)),
        Value::Array(items) => Value::Array(items.iter().map(|v| scrub_json(v, secret)).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (scrub(k, secret), scrub_json(v, secret)))
                .collect(),
        ),
        other => other.clone(),
    }
}
