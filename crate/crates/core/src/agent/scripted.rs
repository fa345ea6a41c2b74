use std::collections::VecDeque;

use super::{AgentError, GenUiClient, Observation, Policy};
use crate::action::Action;

/// Replays a fixed list of actions, one per step.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    actions: VecDeque<Action>,
    step: u64,
}

impl ScriptedPolicy {
    pub fn new(actions: impl IntoIterator<Item = Action>) -> Self {
        ScriptedPolicy {
            actions: actions.into_iter().collect(),
            step: 0,
        }
    }
}

impl Policy for ScriptedPolicy {
    fn decide(&mut self, _obs: &Observation<'_>) -> Result<Action, AgentError> {
        let a = self
            .actions
            .pop_front()
            .ok_or(AgentError::ScriptExhausted(self.step))?;
        self.step += 1;
        Ok(a)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Offline stand-in for the UI generator: a card that restates the
/// instruction, with a dismiss button.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenUi;

impl GenUiClient for TemplateGenUi {
    fn generate(&mut self, instruction: &str) -> Result<String, AgentError> {
        Ok(format!(
            "<style>.genui-card{{width:100%;max-width:400px;padding:16px;font-family:sans-serif}}\
             .genui-card button{{min-width:44px;min-height:44px}}</style>\
             <div class=\"genui-card\"><p>{}</p><button type=\"button\">Dismiss</button></div>",
            escape(instruction)
        ))
    }
}

/// Returns prepared markup in order, then falls back to [`TemplateGenUi`].
#[derive(Debug, Clone, Default)]
pub struct CannedGenUi {
    responses: VecDeque<String>,
}

impl CannedGenUi {
    pub fn new(responses: impl IntoIterator<Item = String>) -> Self {
        CannedGenUi {
            responses: responses.into_iter().collect(),
        }
    }
}

impl GenUiClient for CannedGenUi {
    fn generate(&mut self, instruction: &str) -> Result<String, AgentError> {
        match self.responses.pop_front() {
            Some(html) => Ok(html),
            None => TemplateGenUi.generate(instruction),
        }
    }
}
