use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{LlmClient, LlmError, LlmRequest, RequestTag};

/// One scripted reply. The first rule whose tag and pattern both match the
/// request, and which still has uses left, answers it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default)]
    pub tag: Option<RequestTag>,
    /// Regex searched in the last user message.
    #[serde(default)]
    pub pattern: Option<String>,
    pub response: String,
    /// Number of uses; zero means unlimited.
    #[serde(default = "one")]
    pub repeat: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
struct Fixture {
    #[serde(default = "default_model")]
    model: String,
    rules: Vec<MockRule>,
}

fn default_model() -> String {
    "mock".into()
}

struct Slot {
    rule: MockRule,
    regex: Option<Regex>,
    used: u32,
}

/// Deterministic offline model driven by a rule list.
pub struct MockLlm {
    model: String,
    slots: Mutex<Vec<Slot>>,
    requests: Mutex<Vec<LlmRequest>>,
}

impl MockLlm {
    pub fn new(rules: Vec<MockRule>) -> Result<Self, LlmError> {
        Self::with_model("mock", rules)
    }

    pub fn with_model(model: impl Into<String>, rules: Vec<MockRule>) -> Result<Self, LlmError> {
        let slots = rules
            .into_iter()
            .map(|rule| {
                let regex = rule
                    .pattern
                    .as_deref()
                    .map(Regex::new)
                    .transpose()
                    .map_err(|e| LlmError::Fixture(e.to_string()))?;
                Ok(Slot { rule, regex, used: 0 })
            })
            .collect::<Result<_, LlmError>>()?;
        Ok(Self {
            model: model.into(),
            slots: Mutex::new(slots),
            requests: Mutex::new(Vec::new()),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let f: Fixture = serde_json::from_str(text).map_err(|e| LlmError::Fixture(e.to_string()))?;
        Self::with_model(f.model, f.rules)
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Every request received so far, in order.
    pub fn requests(&self) -> Vec<LlmRequest> {
        self.requests.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Rules with uses left (unlimited rules never count).
    pub fn unused_rules(&self) -> usize {
        self.slots
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .filter(|s| s.rule.repeat != 0 && s.used < s.rule.repeat)
            .count()
    }
}

impl LlmClient for MockLlm {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        self.requests
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(request.clone());
        let prompt = request.last_user().unwrap_or("");
        let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        let slot = slots.iter_mut().find(|s| {
            (s.rule.repeat == 0 || s.used < s.rule.repeat)
                && s.rule.tag.is_none_or(|t| t == request.tag)
                && s.regex.as_ref().is_none_or(|r| r.is_match(prompt))
        });
        match slot {
            Some(s) => {
                s.used += 1;
                Ok(s.rule.response.clone())
            }
            None => Err(LlmError::FixtureExhausted {
                tag: request.tag.as_str().into(),
            }),
        }
    }
}
