use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{LlmClient, LlmError, LlmRequest};
use crate::sync::Semaphore;

pub const API_KEY_ENV: &str = "AVALON_LLM_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL of an OpenAI-compatible endpoint, e.g. `http://host/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(120),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 8,
        }
    }
}

/// Blocking chat-completions client with retry and a global in-flight bound.
pub struct HttpLlmClient {
    config: HttpConfig,
    agent: ureq::Agent,
    in_flight: Semaphore,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl HttpLlmClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let in_flight = Semaphore::new(config.max_in_flight);
        Self { config, agent, in_flight }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let mut req = self.agent.post(&self.endpoint());
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { status, body: text });
        }
        let parsed: Completion =
            serde_json::from_str(&text).map_err(|e| LlmError::Decode(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Decode("no message content in first choice".into()))
    }
}

fn retryable(e: &LlmError) -> bool {
    match e {
        LlmError::Transport(_) => true,
        LlmError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl LlmClient for HttpLlmClient {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let _permit = self.in_flight.acquire();
        let mut delay = self.config.backoff;
        let mut tries = 0;
        loop {
            match self.attempt(request) {
                Err(e) if retryable(&e) && tries < self.config.max_retries => {
                    tries += 1;
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                other => return other,
            }
        }
    }
}
