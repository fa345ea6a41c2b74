//! The agent's action grammar: app actions that drive the device plus the
//! user-facing `speak` and `ask` actions, each carrying a visualization.
//!
//! [`parse_action`] accepts one JSON object and enforces every structural
//! rule; [`serialize_action`] produces the canonical compact form with keys
//! in grammar order, so `parse ∘ serialize` is the identity.
//!
//! ```
//! use vdagent::action::{parse_action, serialize_action, Action};
//!
//! let a = parse_action(r#"{"action_type": "click", "index": 3}"#).unwrap();
//! assert_eq!(a, Action::Click { index: 3 });
//! assert_eq!(serialize_action(&a), r#"{"action_type":"click","index":3}"#);
//! ```

mod distribution;
mod lint;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::device::Direction;
pub use distribution::{distribution, Distribution, VisualCounts};
pub use lint::{lint_trace, LintFinding, RuleId, Severity, TaskMeta, MIN_INSTRUCTION_WORDS};
pub use trace::{read_trace, write_trace, Outcome, TraceEntry, VisualKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema error at {path:?}: {reason}")]
pub struct SchemaError {
    pub path: String,
    pub reason: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        SchemaError {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Status,
    Speak,
    Ask,
    Click,
    LongPress,
    InputText,
    KeyboardEnter,
    NavigateHome,
    NavigateBack,
    Scroll,
    OpenApp,
    Wait,
}

impl ActionKind {
    pub fn is_communication(self) -> bool {
        matches!(self, ActionKind::Speak | ActionKind::Ask)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Status => "status",
            ActionKind::Speak => "speak",
            ActionKind::Ask => "ask",
            ActionKind::Click => "click",
            ActionKind::LongPress => "long_press",
            ActionKind::InputText => "input_text",
            ActionKind::KeyboardEnter => "keyboard_enter",
            ActionKind::NavigateHome => "navigate_home",
            ActionKind::NavigateBack => "navigate_back",
            ActionKind::Scroll => "scroll",
            ActionKind::OpenApp => "open_app",
            ActionKind::Wait => "wait",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Complete,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualizationKind {
    None,
    ShowApp,
    ShowElement,
    GenerateUi,
}

/// Wire shape of a visualization, field order = canonical key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVisualization {
    pub visualization_type: VisualizationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

/// Wire shape of an action, field order = canonical key order.
///
/// This is what trace files store. It can represent structurally invalid
/// actions, which is what the linter needs; [`Action`] cannot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAction {
    pub action_type: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_status: Option<GoalStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visualization: Option<RawVisualization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_name: Option<String>,
}

impl RawAction {
    fn bare(action_type: ActionKind) -> Self {
        RawAction {
            action_type,
            goal_status: None,
            text: None,
            visualization: None,
            direction: None,
            index: None,
            app_name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Visualization {
    /// Voice only.
    None,
    /// Full UI: mirror the whole app screen.
    ShowApp,
    /// Partial UI: crop the listed elements. Never empty.
    ShowElement(Vec<u32>),
    /// GenUI: a generated interface built from this instruction.
    GenerateUi(String),
}

impl Visualization {
    pub fn kind(&self) -> VisualizationKind {
        match self {
            Visualization::None => VisualizationKind::None,
            Visualization::ShowApp => VisualizationKind::ShowApp,
            Visualization::ShowElement(_) => VisualizationKind::ShowElement,
            Visualization::GenerateUi(_) => VisualizationKind::GenerateUi,
        }
    }

    fn to_raw(&self) -> RawVisualization {
        let (index, instruction) = match self {
            Visualization::ShowElement(ix) => (Some(ix.clone()), None),
            Visualization::GenerateUi(s) => (None, Some(s.clone())),
            _ => (None, None),
        };
        RawVisualization {
            visualization_type: self.kind(),
            index,
            instruction,
        }
    }

    fn from_raw(raw: &RawVisualization) -> Result<Self, SchemaError> {
        let path = |f: &str| format!("visualization.{f}");
        let kind = raw.visualization_type;
        if kind != VisualizationKind::ShowElement && raw.index.is_some() {
            return Err(SchemaError::new(path("index"), "only allowed for show_element"));
        }
        if kind != VisualizationKind::GenerateUi && raw.instruction.is_some() {
            return Err(SchemaError::new(path("instruction"), "only allowed for generate_ui"));
        }
        Ok(match kind {
            VisualizationKind::None => Visualization::None,
            VisualizationKind::ShowApp => Visualization::ShowApp,
            VisualizationKind::ShowElement => match &raw.index {
                Some(ix) if !ix.is_empty() => Visualization::ShowElement(ix.clone()),
                Some(_) => return Err(SchemaError::new(path("index"), "must list at least one index")),
                None => return Err(SchemaError::new(path("index"), "missing field")),
            },
            VisualizationKind::GenerateUi => match &raw.instruction {
                Some(s) if !s.trim().is_empty() => Visualization::GenerateUi(s.clone()),
                Some(_) => return Err(SchemaError::new(path("instruction"), "must not be empty")),
                None => return Err(SchemaError::new(path("instruction"), "missing field")),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Status(GoalStatus),
    Speak {
        text: String,
        visualization: Visualization,
    },
    Ask {
        text: String,
        visualization: Visualization,
    },
    Click {
        index: u32,
    },
    LongPress {
        index: u32,
    },
    InputText {
        text: String,
        index: u32,
    },
    KeyboardEnter,
    NavigateHome,
    NavigateBack,
    Scroll {
        direction: Direction,
        index: Option<u32>,
    },
    OpenApp {
        app_name: String,
    },
    Wait,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Status(_) => ActionKind::Status,
            Action::Speak { .. } => ActionKind::Speak,
            Action::Ask { .. } => ActionKind::Ask,
            Action::Click { .. } => ActionKind::Click,
            Action::LongPress { .. } => ActionKind::LongPress,
            Action::InputText { .. } => ActionKind::InputText,
            Action::KeyboardEnter => ActionKind::KeyboardEnter,
            Action::NavigateHome => ActionKind::NavigateHome,
            Action::NavigateBack => ActionKind::NavigateBack,
            Action::Scroll { .. } => ActionKind::Scroll,
            Action::OpenApp { .. } => ActionKind::OpenApp,
            Action::Wait => ActionKind::Wait,
        }
    }

    pub fn visualization(&self) -> Option<&Visualization> {
        match self {
            Action::Speak { visualization, .. } | Action::Ask { visualization, .. } => {
                Some(visualization)
            }
            _ => None,
        }
    }

    pub fn speak(text: impl Into<String>, visualization: Visualization) -> Self {
        Action::Speak {
            text: text.into(),
            visualization,
        }
    }

    pub fn ask(text: impl Into<String>, visualization: Visualization) -> Self {
        Action::Ask {
            text: text.into(),
            visualization,
        }
    }

    pub fn to_raw(&self) -> RawAction {
        let mut raw = RawAction::bare(self.kind());
        match self {
            Action::Status(s) => raw.goal_status = Some(*s),
            Action::Speak {
                text,
                visualization,
            }
            | Action::Ask {
                text,
                visualization,
            } => {
                raw.text = Some(text.clone());
                raw.visualization = Some(visualization.to_raw());
            }
            Action::Click { index } | Action::LongPress { index } => raw.index = Some(*index),
            Action::InputText { text, index } => {
                raw.text = Some(text.clone());
                raw.index = Some(*index);
            }
            Action::Scroll { direction, index } => {
                raw.direction = Some(*direction);
                raw.index = *index;
            }
            Action::OpenApp { app_name } => raw.app_name = Some(app_name.clone()),
            Action::KeyboardEnter | Action::NavigateHome | Action::NavigateBack | Action::Wait => {}
        }
        raw
    }

    /// Validates a wire action against the per-kind field rules.
    pub fn from_raw(raw: &RawAction) -> Result<Self, SchemaError> {
        use ActionKind as K;
        let kind = raw.action_type;
        if !kind.is_communication() && raw.visualization.is_some() {
            return Err(SchemaError::new("visualization", "forbidden on app actions"));
        }
        let allowed: &[&str] = match kind {
            K::Status => &["goal_status"],
            K::Speak | K::Ask => &["text", "visualization"],
            K::Click | K::LongPress => &["index"],
            K::InputText => &["text", "index"],
            K::Scroll => &["direction", "index"],
            K::OpenApp => &["app_name"],
            K::KeyboardEnter | K::NavigateHome | K::NavigateBack | K::Wait => &[],
        };
        let present = [
            ("goal_status", raw.goal_status.is_some()),
            ("text", raw.text.is_some()),
            ("visualization", raw.visualization.is_some()),
            ("direction", raw.direction.is_some()),
            ("index", raw.index.is_some()),
            ("app_name", raw.app_name.is_some()),
        ];
        if let Some((field, _)) = present.iter().find(|(f, p)| *p && !allowed.contains(f)) {
            return Err(SchemaError::new(
                *field,
                format!("not allowed for {}", kind.as_str()),
            ));
        }
        let need = |field: &str, v: bool| {
            if v {
                Ok(())
            } else {
                Err(SchemaError::new(field, "missing field"))
            }
        };
        let index = || raw.index.ok_or_else(|| SchemaError::new("index", "missing field"));
        Ok(match kind {
            K::Status => {
                need("goal_status", raw.goal_status.is_some())?;
                Action::Status(raw.goal_status.unwrap())
            }
            K::Speak | K::Ask => {
                let text = raw
                    .text
                    .clone()
                    .ok_or_else(|| SchemaError::new("text", "missing field"))?;
                if text.trim().is_empty() {
                    return Err(SchemaError::new("text", "must not be empty"));
                }
                let vis = raw
                    .visualization
                    .as_ref()
                    .ok_or_else(|| SchemaError::new("visualization", "missing field"))?;
                let visualization = Visualization::from_raw(vis)?;
                if kind == K::Speak {
                    Action::Speak {
                        text,
                        visualization,
                    }
                } else {
                    Action::Ask {
                        text,
                        visualization,
                    }
                }
            }
            K::Click => Action::Click { index: index()? },
            K::LongPress => Action::LongPress { index: index()? },
            K::InputText => {
                let text = raw
                    .text
                    .clone()
                    .ok_or_else(|| SchemaError::new("text", "missing field"))?;
                Action::InputText {
                    text,
                    index: index()?,
                }
            }
            K::Scroll => {
                need("direction", raw.direction.is_some())?;
                Action::Scroll {
                    direction: raw.direction.unwrap(),
                    index: raw.index,
                }
            }
            K::OpenApp => {
                let app_name = raw
                    .app_name
                    .clone()
                    .ok_or_else(|| SchemaError::new("app_name", "missing field"))?;
                Action::OpenApp { app_name }
            }
            K::KeyboardEnter => Action::KeyboardEnter,
            K::NavigateHome => Action::NavigateHome,
            K::NavigateBack => Action::NavigateBack,
            K::Wait => Action::Wait,
        })
    }
}

fn path_string(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." {
        String::new()
    } else {
        s
    }
}

/// Decodes the wire shape only, without the per-kind structural checks.
pub fn parse_raw_action_value(value: serde_json::Value) -> Result<RawAction, SchemaError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = path_string(e.path());
        SchemaError::new(path, e.into_inner().to_string())
    })
}

pub fn parse_raw_action(text: &str) -> Result<RawAction, SchemaError> {
    let value: serde_json::Value =
        serde_json::from_str(text.trim()).map_err(|e| SchemaError::new("", e.to_string()))?;
    parse_raw_action_value(value)
}

/// Parses one action from JSON, enforcing every structural rule.
pub fn parse_action(text: &str) -> Result<Action, SchemaError> {
    Action::from_raw(&parse_raw_action(text)?)
}

pub fn parse_action_value(value: serde_json::Value) -> Result<Action, SchemaError> {
    Action::from_raw(&parse_raw_action_value(value)?)
}

/// Canonical compact JSON.
pub fn serialize_action(action: &Action) -> String {
    serde_json::to_string(&action.to_raw()).expect("action serialization is infallible")
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawAction::deserialize(deserializer)?;
        Action::from_raw(&raw).map_err(serde::de::Error::custom)
    }
}
