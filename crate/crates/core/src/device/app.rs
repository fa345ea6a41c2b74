//! App definition files: a screen graph whose screens are accessibility
//! trees and whose edges fire on injected input.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::a11y::{parse_tree_value, A11yNode};

/// Task sensitivity tags. Apps carry defaults; scenarios may override them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskTag {
    Money,
    HighStakes,
    LowStakes,
}

impl std::str::FromStr for TaskTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "money" => Ok(TaskTag::Money),
            "high_stakes" => Ok(TaskTag::HighStakes),
            "low_stakes" => Ok(TaskTag::LowStakes),
            other => Err(format!("unknown task tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Click,
    LongPress,
    InputText,
    Scroll,
    KeyboardEnter,
    NavigateBack,
}

/// Side-effect token that lets an overlay touch end a pending `ask`.
pub const RESOLVES_ASK: &str = "resolves_ask";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRule {
    pub on: Trigger,
    /// Node the event must land on (or bubble up to). `None` matches any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    /// Typed text for `input_text`, direction name for `scroll`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub goto: String,
    /// Comma-separated labels recorded in the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_effect: Option<String>,
}

impl TransitionRule {
    pub fn has_effect(&self, token: &str) -> bool {
        self.side_effect
            .as_deref()
            .is_some_and(|s| s.split(',').any(|t| t.trim() == token))
    }

    fn overlaps(&self, other: &TransitionRule) -> bool {
        self.on == other.on
            && self.node == other.node
            && match (&self.text, &other.text) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screen {
    pub id: String,
    pub root: A11yNode,
    pub transitions: Vec<TransitionRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplaySize {
    #[serde(rename = "w")]
    pub width: u32,
    #[serde(rename = "h")]
    pub height: u32,
}

impl DisplaySize {
    pub const PHONE: DisplaySize = DisplaySize {
        width: 1080,
        height: 2400,
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppDefinition {
    pub app_name: String,
    pub display: Option<DisplaySize>,
    pub start_screen: String,
    pub task_tags: BTreeSet<TaskTag>,
    pub screens: Vec<Screen>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AppFile {
    app_name: String,
    #[serde(default)]
    display: Option<DisplaySize>,
    start_screen: String,
    #[serde(default)]
    task_tags: BTreeSet<TaskTag>,
    screens: Vec<ScreenFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScreenFile {
    id: String,
    root: serde_json::Value,
    #[serde(default)]
    transitions: Vec<TransitionRule>,
}

impl AppDefinition {
    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        let file: AppFile =
            serde_json::from_str(text).map_err(|e| DeviceError::InvalidApp(e.to_string()))?;
        let screens = file
            .screens
            .into_iter()
            .map(|s| {
                let root = parse_tree_value(s.root)
                    .map_err(|e| DeviceError::InvalidApp(format!("screen {:?}: {e}", s.id)))?;
                Ok(Screen {
                    id: s.id,
                    root,
                    transitions: s.transitions,
                })
            })
            .collect::<Result<Vec<_>, DeviceError>>()?;
        let app = AppDefinition {
            app_name: file.app_name,
            display: file.display,
            start_screen: file.start_screen,
            task_tags: file.task_tags,
            screens,
        };
        app.validate()?;
        Ok(app)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DeviceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeviceError::InvalidApp(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn screen(&self, id: &str) -> Option<&Screen> {
        self.screens.iter().find(|s| s.id == id)
    }

    /// Finds a node by id in any screen.
    pub fn find_node(&self, id: &str) -> Option<(&Screen, &A11yNode)> {
        self.screens
            .iter()
            .find_map(|s| s.root.find(id).map(|n| (s, n)))
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let invalid = |msg: String| Err(DeviceError::InvalidApp(msg));
        let mut ids = HashSet::new();
        for s in &self.screens {
            if !ids.insert(s.id.as_str()) {
                return invalid(format!("duplicate screen id {:?}", s.id));
            }
        }
        if !ids.contains(self.start_screen.as_str()) {
            return invalid(format!("start screen {:?} does not exist", self.start_screen));
        }
        for s in &self.screens {
            s.root
                .validate()
                .map_err(|e| DeviceError::InvalidApp(format!("screen {:?}: {e}", s.id)))?;
            for (i, rule) in s.transitions.iter().enumerate() {
                if !ids.contains(rule.goto.as_str()) {
                    return invalid(format!(
                        "screen {:?}: transition to missing screen {:?}",
                        s.id, rule.goto
                    ));
                }
                let target = match &rule.node {
                    Some(node) => match s.root.find(node) {
                        Some(n) => Some(n),
                        None => {
                            return invalid(format!(
                                "screen {:?}: transition names missing node {node:?}",
                                s.id
                            ))
                        }
                    },
                    None => None,
                };
                if rule.on == Trigger::InputText && !target.is_some_and(|n| n.editable) {
                    return invalid(format!(
                        "screen {:?}: input_text rule must name an editable node",
                        s.id
                    ));
                }
                if let Some(other) = s.transitions[..i].iter().find(|o| o.overlaps(rule)) {
                    return invalid(format!(
                        "screen {:?}: ambiguous rules for {:?} on {:?} (goto {:?} and {:?})",
                        s.id, rule.on, rule.node, other.goto, rule.goto
                    ));
                }
            }
        }
        Ok(())
    }
}
