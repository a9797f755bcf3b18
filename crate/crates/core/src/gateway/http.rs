//! HTTP adapters translating the common request shape to provider wire formats.

use reqwest::blocking::{Client, RequestBuilder};
use serde_json::{json, Value};

use super::{
    CallError, ChatProvider, ChatRequest, GatewayError, MessageRole, ProviderReply, TokenUsage,
};

const ANTHROPIC_VERSION: &str = "2023-06-01";
const ANTHROPIC_DEFAULT_MAX_TOKENS: u32 = 1024;

fn client() -> Result<Client, GatewayError> {
    Client::builder()
        .build()
        .map_err(|e| GatewayError::Setup(format!("http client: {e}")))
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

fn execute(builder: RequestBuilder) -> Result<Value, CallError> {
    let resp = builder
        .send()
        .map_err(|e| CallError::Transport(e.without_url().to_string()))?;
    let status = resp.status();
    let body = resp
        .text()
        .map_err(|e| CallError::Transport(e.without_url().to_string()))?;
    if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
        return Err(CallError::Auth(format!(
            "status {}: {body}",
            status.as_u16()
        )));
    }
    if !status.is_success() {
        return Err(CallError::Status {
            status: status.as_u16(),
            message: body,
        });
    }
    serde_json::from_str(&body).map_err(|e| CallError::Status {
        status: status.as_u16(),
        message: format!("undecodable response body: {e}"),
    })
}

fn usage(raw: &Value, prompt_key: &str, completion_key: &str) -> Option<TokenUsage> {
    let u = raw.get("usage")?;
    Some(TokenUsage {
        prompt: u.get(prompt_key)?.as_u64()?,
        completion: u.get(completion_key)?.as_u64()?,
    })
}

/// `/chat/completions` endpoints (OpenAI and the many servers mimicking it).
#[derive(Debug)]
pub struct OpenAiCompatibleProvider {
    base_url: String,
    client: Client,
}

impl OpenAiCompatibleProvider {
    pub fn new(base_url: &str) -> Result<Self, GatewayError> {
        Ok(OpenAiCompatibleProvider {
            base_url: base_url.to_string(),
            client: client()?,
        })
    }

    pub fn body(req: &ChatRequest) -> Value {
        let messages: Vec<Value> = req
            .messages
            .iter()
            .map(|m| json!({ "role": m.role.as_str(), "content": m.content }))
            .collect();
        let mut body = json!({ "model": req.model, "messages": messages });
        if let Some(t) = req.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(n) = req.max_tokens {
            body["max_tokens"] = json!(n);
        }
        body
    }
}

impl ChatProvider for OpenAiCompatibleProvider {
    fn send(
        &self,
        req: &ChatRequest,
        credential: Option<&str>,
    ) -> Result<ProviderReply, CallError> {
        let mut builder = self
            .client
            .post(endpoint(&self.base_url, "chat/completions"))
            .timeout(req.timeout)
            .json(&Self::body(req));
        if let Some(key) = credential {
            builder = builder.bearer_auth(key);
        }
        let raw = execute(builder)?;
        let content = raw
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| CallError::Status {
                status: 200,
                message: "response has no choices[0].message.content".into(),
            })?
            .to_string();
        Ok(ProviderReply {
            token_usage: usage(&raw, "prompt_tokens", "completion_tokens"),
            content,
            raw,
        })
    }
}

/// Anthropic `/messages` endpoint.
#[derive(Debug)]
pub struct AnthropicProvider {
    base_url: String,
    client: Client,
}

impl AnthropicProvider {
    pub fn new(base_url: &str) -> Result<Self, GatewayError> {
        Ok(AnthropicProvider {
            base_url: base_url.to_string(),
            client: client()?,
        })
    }

    /// System text goes in its own field; consecutive same-role turns are merged.
    pub fn body(req: &ChatRequest) -> Value {
        let system: Vec<&str> = req
            .messages
            .iter()
            .filter(|m| m.role == MessageRole::System)
            .map(|m| m.content.as_str())
            .collect();
        let mut turns: Vec<(MessageRole, String)> = Vec::new();
        for m in req
            .messages
            .iter()
            .filter(|m| m.role != MessageRole::System)
        {
            match turns.last_mut() {
                Some((role, text)) if *role == m.role => {
                    text.push_str("\n\n");
                    text.push_str(&m.content);
                }
                _ => turns.push((m.role, m.content.clone())),
            }
        }
        let messages: Vec<Value> = turns
            .iter()
            .map(|(role, text)| json!({ "role": role.as_str(), "content": text }))
            .collect();
        let mut body = json!({
            "model": req.model,
            "messages": messages,
            "max_tokens": req.max_tokens.unwrap_or(ANTHROPIC_DEFAULT_MAX_TOKENS),
        });
        if !system.is_empty() {
            body["system"] = json!(system.join("\n\n"));
        }
        if let Some(t) = req.temperature {
            body["temperature"] = json!(t);
        }
        body
    }
}

impl ChatProvider for AnthropicProvider {
    fn send(
        &self,
        req: &ChatRequest,
        credential: Option<&str>,
    ) -> Result<ProviderReply, CallError> {
        let mut builder = self
            .client
            .post(endpoint(&self.base_url, "messages"))
            .timeout(req.timeout)
            .header("anthropic-version", ANTHROPIC_VERSION)
            .json(&Self::body(req));
        if let Some(key) = credential {
            builder = builder.header("x-api-key", key);
        }
        let raw = execute(builder)?;
        let content: String = raw
            .get("content")
            .and_then(Value::as_array)
            .map(|blocks| {
                blocks
                    .iter()
                    .filter_map(|b| b.get("text").and_then(Value::as_str))
                    .collect()
            })
            .ok_or_else(|| CallError::Status {
                status: 200,
                message: "response has no content blocks".into(),
            })?;
        Ok(ProviderReply {
            token_usage: usage(&raw, "input_tokens", "output_tokens"),
            content,
            raw,
        })
    }
}
