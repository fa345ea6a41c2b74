//! The observe → decide → execute loop.
//!
//! [`run_task`] owns every device mutation of a run. App actions become
//! injected input events; `speak` and `ask` become overlay frames. An `ask`
//! blocks until the user replies in text or a forwarded touch fires a
//! transition tagged [`RESOLVES_ASK`].

mod config;
mod llm;
mod port;
mod scripted;

use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::action::{Action, GoalStatus, Outcome, TraceEntry, VisualKind, Visualization};
use crate::device::{Device, Framebuffer, InputEvent, TransitionResult, RESOLVES_ASK};
use crate::overlay::{
    full_view, genui_html, make_partial_frame, map_touch, ClientMessage, FrameMode, FrameVisual,
    OverlayError, OverlayFrame, Viewport,
};

pub use config::{Config, GenUiConfig, LimitsConfig, LlmConfig, OverlayConfig, DEFAULT_KEY_ENV};
pub use llm::{
    extract_action, ChatGenUi, ChatMessage, ChatTransport, HttpChat, LlmPolicy, MAX_RETRIES,
};
pub use port::{spawn_session, ChannelPort, Disconnected, OverlayPort};
pub use scripted::{CannedGenUi, ScriptedPolicy, TemplateGenUi};

/// The system prompt for the acting agent.
pub const AGENT_PROMPT: &str = include_str!("../../assets/prompts/agent_system.txt");
/// The system prompt for the UI generator.
pub const GENUI_PROMPT: &str = include_str!("../../assets/prompts/genui_system.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("model endpoint unreachable: {0}")]
    ModelUnreachable(String),
    #[error("no valid action after {attempts} attempts: {last_error}")]
    UnparseableAfterRetries { attempts: u32, last_error: String },
    #[error("overlay unavailable: {0}")]
    OverlayUnavailable(String),
    #[error("script exhausted at step {0}")]
    ScriptExhausted(u64),
    #[error("generated UI request failed: {0}")]
    GenUi(String),
}

/// One executed step, as fed back to the policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub step: u64,
    pub action: Action,
    pub outcomes: Vec<Outcome>,
    pub screen_after: String,
}

#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub goal: &'a str,
    pub dom_text: &'a str,
    pub screenshot: &'a Framebuffer,
    pub history: &'a [StepRecord],
}

pub fn observe<'a>(device: &'a Device, goal: &'a str, history: &'a [StepRecord]) -> Observation<'a> {
    Observation {
        goal,
        dom_text: device.current_tree().dom_text(),
        screenshot: device.framebuffer(),
        history,
    }
}

pub trait Policy {
    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError>;
}

/// Produces markup for a `generate_ui` visualization. It sees only the
/// instruction, never the screen.
pub trait GenUiClient {
    fn generate(&mut self, instruction: &str) -> Result<String, AgentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentOptions {
    pub max_steps: u64,
    pub viewport: Viewport,
    /// How long a `speak` waits for the client's ack before moving on.
    pub ack_timeout: Duration,
    /// How long an `ask` waits for each user event.
    pub reply_timeout: Duration,
}

impl Default for AgentOptions {
    fn default() -> Self {
        AgentOptions {
            max_steps: 30,
            viewport: Viewport::DEFAULT,
            ack_timeout: Duration::from_secs(5),
            reply_timeout: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub trace: Vec<TraceEntry>,
    pub history: Vec<StepRecord>,
    pub status: Option<GoalStatus>,
    pub final_screen: String,
    /// Set when the run stopped on an error rather than a status action or
    /// the step limit.
    pub error: Option<AgentError>,
}

/// Hex SHA-256 of the DOM text, used to fingerprint what the policy saw.
pub fn tree_digest(dom_text: &str) -> String {
    Sha256::digest(dom_text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn run_task(
    goal: &str,
    device: &mut Device,
    policy: &mut dyn Policy,
    port: &mut dyn OverlayPort,
    genui: &mut dyn GenUiClient,
    opts: &AgentOptions,
) -> RunOutput {
    let mut exec = Executor {
        port,
        genui,
        opts,
        next_frame_id: 1,
        active_frame: None,
    };
    let mut trace = Vec::new();
    let mut history: Vec<StepRecord> = Vec::new();
    let mut status = None;
    let mut error = None;
    let mut step = 0;
    while step < opts.max_steps {
        let obs = observe(device, goal, &history);
        let digest = tree_digest(obs.dom_text);
        let screen = device.screen_id().to_string();
        let action = match policy.decide(&obs) {
            Ok(a) => a,
            Err(e) => {
                trace.push(TraceEntry {
                    step,
                    action: None,
                    tree_digest: Some(digest),
                    screen: Some(screen),
                    outcomes: vec![Outcome::Error {
                        reason: e.to_string(),
                    }],
                });
                error = Some(e);
                break;
            }
        };
        let mut outcomes = Vec::new();
        let result = exec.execute(&action, device, &mut outcomes);
        trace.push(TraceEntry {
            step,
            action: Some(action.to_raw()),
            tree_digest: Some(digest),
            screen: Some(screen),
            outcomes: outcomes.clone(),
        });
        history.push(StepRecord {
            step,
            action: action.clone(),
            outcomes,
            screen_after: device.screen_id().to_string(),
        });
        step += 1;
        if let Err(e) = result {
            error = Some(e);
            break;
        }
        if let Action::Status(s) = action {
            status = Some(s);
            break;
        }
    }
    if status.is_none() && error.is_none() {
        trace.push(TraceEntry {
            step,
            action: None,
            tree_digest: None,
            screen: Some(device.screen_id().to_string()),
            outcomes: vec![Outcome::StepLimitExceeded {
                max_steps: opts.max_steps,
            }],
        });
    }
    exec.dismiss_active();
    RunOutput {
        trace,
        history,
        status,
        final_screen: device.screen_id().to_string(),
        error,
    }
}

fn applied(r: TransitionResult) -> Outcome {
    if r.consumed {
        Outcome::Applied {
            new_screen: r.new_screen,
            side_effect: r.side_effect,
        }
    } else {
        Outcome::ConsumedNoOp
    }
}

fn has_token(side_effect: Option<&str>, token: &str) -> bool {
    side_effect.is_some_and(|s| s.split(',').any(|t| t.trim() == token))
}

struct Executor<'p> {
    port: &'p mut dyn OverlayPort,
    genui: &'p mut dyn GenUiClient,
    opts: &'p AgentOptions,
    next_frame_id: u64,
    active_frame: Option<u64>,
}

impl Executor<'_> {
    fn execute(
        &mut self,
        action: &Action,
        device: &mut Device,
        out: &mut Vec<Outcome>,
    ) -> Result<(), AgentError> {
        let center = |device: &Device, index: u32| {
            device
                .current_tree()
                .entry(index)
                .map(|e| {
                    let (x, y) = e.bounds.center();
                    (x as i64, y as i64)
                })
                .ok_or(format!("unknown index {index}"))
        };
        let event = match action {
            Action::Status(_) => return Ok(()),
            Action::Speak {
                text,
                visualization,
            } => return self.communicate(FrameMode::Speak, text, visualization, device, out),
            Action::Ask {
                text,
                visualization,
            } => return self.communicate(FrameMode::Ask, text, visualization, device, out),
            Action::Wait => {
                out.push(Outcome::Applied {
                    new_screen: None,
                    side_effect: None,
                });
                return Ok(());
            }
            Action::OpenApp { app_name } => {
                out.push(if *app_name == device.app().app_name {
                    Outcome::Applied {
                        new_screen: None,
                        side_effect: None,
                    }
                } else {
                    Outcome::ConsumedNoOp
                });
                return Ok(());
            }
            Action::Click { index } => center(device, *index).map(|(x, y)| InputEvent::Tap { x, y }),
            Action::LongPress { index } => {
                center(device, *index).map(|(x, y)| InputEvent::LongPress { x, y })
            }
            Action::InputText { text, index } => {
                center(device, *index).map(|(x, y)| InputEvent::InputText {
                    x,
                    y,
                    text: text.clone(),
                })
            }
            Action::Scroll { direction, index } => match index {
                Some(ix) => center(device, *ix).map(|at| InputEvent::Scroll {
                    direction: *direction,
                    at: Some(at),
                }),
                None => Ok(InputEvent::Scroll {
                    direction: *direction,
                    at: None,
                }),
            },
            Action::KeyboardEnter => Ok(InputEvent::KeyboardEnter),
            Action::NavigateHome => Ok(InputEvent::NavigateHome),
            Action::NavigateBack => Ok(InputEvent::NavigateBack),
        };
        match event {
            Ok(ev) => match device.inject(ev) {
                Ok(r) => out.push(applied(r)),
                Err(e) => out.push(Outcome::Error {
                    reason: e.to_string(),
                }),
            },
            Err(reason) => out.push(Outcome::Error { reason }),
        }
        Ok(())
    }

    fn build_visual(
        &mut self,
        visualization: &Visualization,
        device: &Device,
        out: &mut Vec<Outcome>,
    ) -> FrameVisual {
        let vp = self.opts.viewport;
        let full = || FrameVisual::Full(full_view(device.framebuffer(), vp));
        match visualization {
            Visualization::None => FrameVisual::None,
            Visualization::ShowApp => full(),
            Visualization::ShowElement(indices) => {
                let shot = device.framebuffer();
                match make_partial_frame(shot, device.current_tree(), indices, vp, FrameMode::Speak, "")
                {
                    Ok(f) => f.visual,
                    Err(OverlayError::UnknownIndex(e)) => {
                        out.push(Outcome::Error {
                            reason: e.to_string(),
                        });
                        full()
                    }
                    Err(e) => {
                        out.push(Outcome::PartialFallback {
                            reason: e.to_string(),
                        });
                        full()
                    }
                }
            }
            Visualization::GenerateUi(instruction) => {
                let html = self
                    .genui
                    .generate(instruction)
                    .map_err(|e| e.to_string())
                    .and_then(|raw| genui_html(&raw).map_err(|e| e.to_string()));
                match html {
                    Ok(html) => FrameVisual::Genui(html),
                    Err(reason) => {
                        out.push(Outcome::GenuiFallback { reason });
                        full()
                    }
                }
            }
        }
    }

    fn communicate(
        &mut self,
        mode: FrameMode,
        text: &str,
        visualization: &Visualization,
        device: &mut Device,
        out: &mut Vec<Outcome>,
    ) -> Result<(), AgentError> {
        let visual = self.build_visual(visualization, device, out);
        if !self.port.is_connected() {
            if visual.kind() == VisualKind::None {
                // voice only, nothing to show
                return Ok(());
            }
            let e = AgentError::OverlayUnavailable("no overlay client connected".into());
            out.push(Outcome::Error {
                reason: e.to_string(),
            });
            return Err(e);
        }
        self.dismiss_active();
        let frame = OverlayFrame {
            frame_id: self.next_frame_id,
            mode,
            text: text.to_string(),
            visual,
        };
        self.next_frame_id += 1;
        let overlay_err = |e: OverlayError| AgentError::OverlayUnavailable(e.to_string());
        if let Err(e) = self.port.present(&frame) {
            let e = overlay_err(e);
            out.push(Outcome::Error {
                reason: e.to_string(),
            });
            return Err(e);
        }
        self.active_frame = Some(frame.frame_id);
        out.push(Outcome::Presented {
            frame_id: frame.frame_id,
            visual: frame.visual.kind(),
        });
        match mode {
            FrameMode::Speak => {
                self.await_ack(frame.frame_id);
                Ok(())
            }
            FrameMode::Ask => {
                let r = self.await_reply(&frame, device, out);
                if let Err(e) = &r {
                    out.push(Outcome::Error {
                        reason: e.to_string(),
                    });
                }
                self.dismiss_active();
                r
            }
        }
    }

    /// Best effort: a missing ack only delays the loop.
    fn await_ack(&mut self, frame_id: u64) {
        let deadline = std::time::Instant::now() + self.opts.ack_timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            if left.is_zero() {
                return;
            }
            match self.port.next_event(left) {
                Ok(Some(ClientMessage::Ack { frame_id: id })) if id == frame_id => return,
                Ok(Some(_)) => continue,
                Ok(None) | Err(_) => return,
            }
        }
    }

    fn await_reply(
        &mut self,
        frame: &OverlayFrame,
        device: &mut Device,
        out: &mut Vec<Outcome>,
    ) -> Result<(), AgentError> {
        let offset = match &frame.visual {
            FrameVisual::Full(f) => (f.offset.0 as i64, f.offset.1 as i64),
            _ => (0, 0),
        };
        loop {
            let msg = self
                .port
                .next_event(self.opts.reply_timeout)
                .map_err(|e| AgentError::OverlayUnavailable(e.to_string()))?
                .ok_or_else(|| AgentError::OverlayUnavailable("no reply to ask".into()))?;
            if msg.frame_id() != frame.frame_id {
                continue;
            }
            match msg {
                ClientMessage::Ack { .. } => {}
                ClientMessage::TextReply { text, .. } => {
                    out.push(Outcome::UserReplied { text });
                    return Ok(());
                }
                ClientMessage::Touch { tile_id, u, v, .. } => {
                    // touches outside the image are dropped, as the client would
                    let Ok((x, y)) = map_touch(frame, tile_id, u + offset.0, v + offset.1) else {
                        continue;
                    };
                    let r = match device.inject(InputEvent::Tap { x, y }) {
                        Ok(r) => r,
                        Err(_) => continue,
                    };
                    let resolves = has_token(r.side_effect.as_deref(), RESOLVES_ASK);
                    out.push(Outcome::OverlayTouch {
                        x,
                        y,
                        new_screen: r.new_screen,
                        side_effect: r.side_effect,
                    });
                    if resolves {
                        return Ok(());
                    }
                }
            }
        }
    }

    fn dismiss_active(&mut self) {
        if let Some(id) = self.active_frame.take() {
            // a vanished client needs no dismissal
            let _ = self.port.dismiss(id);
        }
    }
}

/// Screens the agent acted on, consecutive repeats collapsed.
pub fn screen_flow(trace: &[TraceEntry]) -> Vec<String> {
    let mut flow: Vec<String> = Vec::new();
    for s in trace.iter().filter(|e| e.action.is_some()).filter_map(|e| e.screen.as_ref()) {
        if flow.last() != Some(s) {
            flow.push(s.clone());
        }
    }
    flow
}
