use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CallError, ChatProvider, ChatRequest, GatewayError, ProviderReply};

/// One canned outcome in a mock script.
///
/// On disk a script is a JSON array such as
/// `[{"transport": "reset"}, {"reply": "{\"answer\": 33.3}"}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockStep {
    Reply(String),
    Transport(String),
    Status { status: u16, message: String },
    Auth(String),
}

impl MockStep {
    pub fn reply(s: impl Into<String>) -> Self {
        MockStep::Reply(s.into())
    }

    pub fn transport(s: impl Into<String>) -> Self {
        MockStep::Transport(s.into())
    }

    pub fn status(status: u16, message: impl Into<String>) -> Self {
        MockStep::Status {
            status,
            message: message.into(),
        }
    }

    pub fn auth(s: impl Into<String>) -> Self {
        MockStep::Auth(s.into())
    }
}

/// Scripted provider: plays its steps in order, then repeats the last one.
#[derive(Debug)]
pub struct MockProvider {
    steps: Vec<MockStep>,
    cursor: Mutex<usize>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(steps: Vec<MockStep>) -> Self {
        MockProvider {
            steps,
            cursor: Mutex::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Setup(format!("mock script {}: {e}", path.display())))?;
        let steps: Vec<MockStep> = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Setup(format!("mock script {}: {e}", path.display())))?;
        if steps.is_empty() {
            return Err(GatewayError::Setup(format!(
                "mock script {} has no steps",
                path.display()
            )));
        }
        Ok(MockProvider::new(steps))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn next_step(&self) -> Option<MockStep> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let idx = (*cursor).min(self.steps.len().checked_sub(1)?);
        *cursor += 1;
        Some(self.steps[idx].clone())
    }
}

impl ChatProvider for MockProvider {
    fn send(
        &self,
        req: &ChatRequest,
        _credential: Option<&str>,
    ) -> Result<ProviderReply, CallError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match self.next_step() {
            None => Err(CallError::Transport("mock script is empty".into())),
            Some(MockStep::Reply(content)) => Ok(ProviderReply {
                raw: serde_json::json!({ "mock": true, "model": req.model, "content": content }),
                content,
                token_usage: None,
            }),
            Some(MockStep::Transport(m)) => Err(CallError::Transport(m)),
            Some(MockStep::Status { status, message }) => {
                Err(CallError::Status { status, message })
            }
            Some(MockStep::Auth(m)) => Err(CallError::Auth(m)),
        }
    }
}
