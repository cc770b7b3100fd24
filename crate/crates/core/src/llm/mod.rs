//! Chat-completion plumbing shared by the LLM agent and the code loop.

mod http;
mod mock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpConfig, HttpLlmClient, API_KEY_ENV};
pub use mock::{MockLlm, MockRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestTag {
    TeamSelection,
    Discussion,
    Vote,
    Code,
    Assassination,
}

impl RequestTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestTag::TeamSelection => "team_selection",
            RequestTag::Discussion => "discussion",
            RequestTag::Vote => "vote",
            RequestTag::Code => "code",
            RequestTag::Assassination => "assassination",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: ChatRole::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub tag: RequestTag,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl LlmRequest {
    pub fn last_user(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == ChatRole::User)
            .map(|m| m.content.as_str())
    }
}

/// A request and what came back, as stored in the game record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub model: String,
    pub request: LlmRequest,
    pub response: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion: {0}")]
    Decode(String),
    #[error("mock fixture has no rule left for a {tag} request")]
    FixtureExhausted { tag: String },
    #[error("invalid mock fixture: {0}")]
    Fixture(String),
}

impl LlmError {
    /// Fatal errors abort the game instead of triggering a fallback.
    pub fn is_fatal(&self) -> bool {
        matches!(self, LlmError::FixtureExhausted { .. } | LlmError::Fixture(_))
    }
}

/// Anything that can answer a chat request.
pub trait LlmClient: Send + Sync {
    fn model(&self) -> &str;
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError>;
}
