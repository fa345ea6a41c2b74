//! Model-backed policy and UI generator over a chat-completions endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AgentError, GenUiClient, Observation, Policy, AGENT_PROMPT, GENUI_PROMPT};
use crate::action::{parse_action_value, serialize_action, Action};

/// Re-prompts after the first answer, on a missing or invalid action.
pub const MAX_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

/// Sends a conversation, returns the assistant's reply text.
pub trait ChatTransport {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, AgentError>;
}

/// OpenAI-style `POST .../chat/completions`.
#[derive(Debug)]
pub struct HttpChat {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChat {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpChat {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            agent,
        }
    }
}

impl ChatTransport for HttpChat {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, AgentError> {
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0,
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let unreachable = |e: ureq::Error| AgentError::ModelUnreachable(e.to_string());
        let reply: Value = req
            .send_json(&body)
            .map_err(unreachable)?
            .body_mut()
            .read_json()
            .map_err(unreachable)?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| AgentError::ModelUnreachable("response has no message content".into()))
    }
}

/// Parses the JSON that follows the first line starting with `Action:`.
pub fn extract_action(reply: &str) -> Result<Action, String> {
    let start = reply
        .lines()
        .find_map(|l| l.trim_start().strip_prefix("Action:"))
        .ok_or("no line starting with \"Action:\"")?;
    // the object may continue on later lines
    let offset = reply.find(start).unwrap_or(0);
    let rest = &reply[offset..];
    let value = serde_json::Deserializer::from_str(rest)
        .into_iter::<Value>()
        .next()
        .ok_or("nothing after \"Action:\"")?
        .map_err(|e| format!("invalid JSON after \"Action:\": {e}"))?;
    parse_action_value(value).map_err(|e| e.to_string())
}

fn render_observation(obs: &Observation<'_>) -> String {
    let mut s = format!(
        "User goal: {}\n\nCurrent UI elements:\n{}\n\nHistory:\n",
        obs.goal, obs.dom_text
    );
    if obs.history.is_empty() {
        s.push_str("(no actions yet)\n");
    }
    for r in obs.history {
        let outcomes = serde_json::to_string(&r.outcomes).expect("outcomes serialize");
        s.push_str(&format!(
            "Step {}: {} -> {} (screen after: {})\n",
            r.step,
            serialize_action(&r.action),
            outcomes,
            r.screen_after
        ));
    }
    s
}

/// Asks a model for each action using the bundled agent prompt.
#[derive(Debug)]
pub struct LlmPolicy<T> {
    transport: T,
    system_prompt: String,
}

impl<T: ChatTransport> LlmPolicy<T> {
    pub fn new(transport: T) -> Self {
        LlmPolicy {
            transport,
            system_prompt: AGENT_PROMPT.to_string(),
        }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

impl<T: ChatTransport> Policy for LlmPolicy<T> {
    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError> {
        let mut messages = vec![
            ChatMessage::new("system", self.system_prompt.clone()),
            ChatMessage::new("user", render_observation(obs)),
        ];
        let mut attempt = 0;
        loop {
            let reply = self.transport.complete(&messages)?;
            let err = match extract_action(&reply) {
                Ok(a) => return Ok(a),
                Err(e) => e,
            };
            attempt += 1;
            if attempt > MAX_RETRIES {
                return Err(AgentError::UnparseableAfterRetries {
                    attempts: attempt,
                    last_error: err,
                });
            }
            messages.push(ChatMessage::new("assistant", reply));
            messages.push(ChatMessage::new(
                "user",
                format!(
                    "Your previous answer was rejected: {err}\n\
                     Output exactly one action, on a line starting with \"Action:\"."
                ),
            ));
        }
    }
}

/// UI generator backed by a chat model. Each call is a fresh two-message
/// conversation carrying only the instruction.
#[derive(Debug)]
pub struct ChatGenUi<T> {
    transport: T,
}

impl<T: ChatTransport> ChatGenUi<T> {
    pub fn new(transport: T) -> Self {
        ChatGenUi { transport }
    }
}

impl<T: ChatTransport> GenUiClient for ChatGenUi<T> {
    fn generate(&mut self, instruction: &str) -> Result<String, AgentError> {
        self.transport
            .complete(&[
                ChatMessage::new("system", GENUI_PROMPT),
                ChatMessage::new("user", instruction),
            ])
            .map_err(|e| AgentError::GenUi(e.to_string()))
    }
}
