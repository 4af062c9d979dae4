//! Remote chat-completion backend.
//!
//! Wire format: POST `{model, messages: [{role, content}], temperature, n}`,
//! response `{choices: [{message: {content}}]}`. The bearer token is read
//! from the environment variable named in [`HttpConfig::api_key_env`].

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendError};
use super::request::{RoleKind, RoleRequest};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub n: usize,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChatChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

fn output_hint(kind: RoleKind) -> Option<&'static str> {
    match kind {
        RoleKind::RankWindow => Some("Reply with the ranking only, using the passage identifiers, e.g. [2] > [1] > [3]."),
        RoleKind::ScoreExpansion | RoleKind::ScoreReranking | RoleKind::ScoreAnswer => {
            Some("Reply with a single number between 0 and 1.")
        }
        RoleKind::ProposePrompt => Some("Reply with the rewritten prompt only."),
        _ => None,
    }
}

/// System message = the request prompt; user message = the context fields
/// as titled sections.
pub fn chat_messages(request: &RoleRequest) -> Vec<ChatMessage> {
    let mut user = String::new();
    for (k, v) in &request.context {
        user.push_str(&format!("## {k}\n{v}\n\n"));
    }
    if let Some(hint) = output_hint(request.role_kind) {
        user.push_str(hint);
    }
    vec![
        ChatMessage { role: "system".into(), content: request.prompt.clone() },
        ChatMessage { role: "user".into(), content: user.trim_end().to_owned() },
    ]
}

pub struct HttpBackend {
    id: String,
    config: HttpConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(id: impl Into<String>, config: HttpConfig) -> Result<Self, BackendError> {
        let token = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| BackendError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend { id: id.into(), config, token, client })
    }

    fn post(&self, body: &ChatRequest) -> Result<Vec<String>, BackendError> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body: text });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| BackendError::Decode(e.to_string()))?;
        Ok(parsed.choices.into_iter().map(|c| c.message.content.unwrap_or_default()).collect())
    }
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("id", &self.id).field("endpoint", &self.config.endpoint).finish()
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError> {
        let messages = chat_messages(request);
        let mut samples = Vec::with_capacity(request.sample_count);
        // some endpoints ignore `n`; top up with further calls
        for _ in 0..request.sample_count {
            let body = ChatRequest {
                model: self.config.model.clone(),
                messages: messages.iter().map(|m| ChatMessage { role: m.role.clone(), content: m.content.clone() }).collect(),
                temperature: request.temperature,
                n: request.sample_count - samples.len(),
            };
            let got = self.post(&body)?;
            if got.is_empty() {
                return Err(BackendError::Decode("response has no choices".into()));
            }
            samples.extend(got);
            if samples.len() >= request.sample_count {
                break;
            }
        }
        samples.truncate(request.sample_count);
        Ok(samples)
    }
}
