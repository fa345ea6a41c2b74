//! Virtual-display device simulator.
//!
//! A [`Device`] hosts one [`AppDefinition`] off-screen: it tracks the current
//! screen, renders it into a [`Framebuffer`], and turns injected
//! [`InputEvent`]s into screen transitions. Nothing here ever presents to the
//! user; showing anything is the overlay engine's job.

mod app;
mod framebuffer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use app::{AppDefinition, DisplaySize, Screen, TaskTag, TransitionRule, Trigger, RESOLVES_ASK};
pub use framebuffer::{node_color, render_tree, Framebuffer};

use crate::a11y::{assign_indices, IndexedTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("invalid app definition: {0}")]
    InvalidApp(String),
    #[error("event coordinates ({0}, {1}) are outside the display")]
    OutOfBounds(i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputEvent {
    Tap { x: i64, y: i64 },
    LongPress { x: i64, y: i64 },
    InputText { x: i64, y: i64, text: String },
    Scroll { direction: Direction, at: Option<(i64, i64)> },
    KeyboardEnter,
    NavigateBack,
    NavigateHome,
}

impl InputEvent {
    fn point(&self) -> Option<(i64, i64)> {
        match self {
            InputEvent::Tap { x, y }
            | InputEvent::LongPress { x, y }
            | InputEvent::InputText { x, y, .. } => Some((*x, *y)),
            InputEvent::Scroll { at, .. } => *at,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionResult {
    pub consumed: bool,
    /// Set when the current screen changed.
    pub new_screen: Option<String>,
    pub side_effect: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub screen: String,
    pub event: InputEvent,
    pub result: TransitionResult,
}

/// An app running on an off-screen display.
#[derive(Debug, Clone)]
pub struct Device {
    display: DisplaySize,
    app: AppDefinition,
    current: usize,
    tree: IndexedTree,
    framebuffer: Framebuffer,
    back_stack: Vec<usize>,
    event_log: Vec<EventRecord>,
}

impl Device {
    /// Creates the virtual display and starts the app on its start screen.
    pub fn launch(app: AppDefinition, display: DisplaySize) -> Result<Self, DeviceError> {
        app.validate()?;
        if display.width == 0 || display.height == 0 {
            return Err(DeviceError::InvalidApp("display must be non-empty".into()));
        }
        let full = crate::a11y::Rect::new(0, 0, display.width, display.height);
        if let Some(s) = app.screens.iter().find(|s| !full.contains_rect(&s.root.bounds)) {
            return Err(DeviceError::InvalidApp(format!(
                "screen {:?} root bounds {} exceed the {}x{} display",
                s.id, s.root.bounds, display.width, display.height
            )));
        }
        let start = app
            .screens
            .iter()
            .position(|s| s.id == app.start_screen)
            .expect("validated start screen");
        let screen = &app.screens[start];
        let tree = assign_indices(&screen.root);
        let framebuffer = render_tree(&screen.root, display.width, display.height);
        Ok(Device {
            display,
            app,
            current: start,
            tree,
            framebuffer,
            back_stack: Vec::new(),
            event_log: Vec::new(),
        })
    }

    pub fn display(&self) -> DisplaySize {
        self.display
    }

    pub fn app(&self) -> &AppDefinition {
        &self.app
    }

    pub fn screen(&self) -> &Screen {
        &self.app.screens[self.current]
    }

    pub fn screen_id(&self) -> &str {
        &self.screen().id
    }

    pub fn back_stack(&self) -> impl Iterator<Item = &str> {
        self.back_stack.iter().map(|&i| self.app.screens[i].id.as_str())
    }

    pub fn event_log(&self) -> &[EventRecord] {
        &self.event_log
    }

    /// A copy of the current framebuffer.
    pub fn screenshot(&self) -> Framebuffer {
        self.framebuffer.clone()
    }

    pub fn framebuffer(&self) -> &Framebuffer {
        &self.framebuffer
    }

    pub fn current_tree(&self) -> &IndexedTree {
        &self.tree
    }

    pub fn inject(&mut self, event: InputEvent) -> Result<TransitionResult, DeviceError> {
        if let Some((x, y)) = event.point() {
            if x < 0 || y < 0 || x >= self.display.width as i64 || y >= self.display.height as i64
            {
                return Err(DeviceError::OutOfBounds(x, y));
            }
        }
        let screen_before = self.screen_id().to_string();
        let result = self.dispatch(&event);
        self.event_log.push(EventRecord {
            screen: screen_before,
            event,
            result: result.clone(),
        });
        Ok(result)
    }

    fn dispatch(&mut self, event: &InputEvent) -> TransitionResult {
        let (trigger, text) = match event {
            InputEvent::Tap { .. } => (Trigger::Click, None),
            InputEvent::LongPress { .. } => (Trigger::LongPress, None),
            InputEvent::InputText { text, .. } => (Trigger::InputText, Some(text.as_str())),
            InputEvent::Scroll { direction, .. } => (Trigger::Scroll, Some(direction.as_str())),
            InputEvent::KeyboardEnter => (Trigger::KeyboardEnter, None),
            InputEvent::NavigateBack => (Trigger::NavigateBack, None),
            InputEvent::NavigateHome => return self.go_home(),
        };
        let screen = self.screen();
        let path: Vec<&str> = match event.point() {
            Some((x, y)) => screen.root.hit_path(x, y).iter().map(|n| n.id.as_str()).collect(),
            None => Vec::new(),
        };
        let text_ok = |rule: &TransitionRule| match (&rule.text, text) {
            (Some(want), Some(got)) => want == got,
            (Some(_), None) => false,
            (None, _) => true,
        };
        let node_rule = path.iter().rev().find_map(|id| {
            screen
                .transitions
                .iter()
                .find(|r| r.on == trigger && r.node.as_deref() == Some(id) && text_ok(r))
        });
        let rule = node_rule.or_else(|| {
            screen
                .transitions
                .iter()
                .find(|r| r.on == trigger && r.node.is_none() && text_ok(r))
        });
        if let Some(rule) = rule.cloned() {
            return self.apply(&rule);
        }
        match event {
            InputEvent::NavigateBack => self.go_back(),
            InputEvent::InputText { .. } => {
                let editable = path
                    .iter()
                    .rev()
                    .filter_map(|id| screen.root.find(id))
                    .any(|n| n.editable);
                TransitionResult {
                    consumed: editable,
                    ..Default::default()
                }
            }
            _ => TransitionResult::default(),
        }
    }

    fn apply(&mut self, rule: &TransitionRule) -> TransitionResult {
        let target = self
            .app
            .screens
            .iter()
            .position(|s| s.id == rule.goto)
            .expect("validated transition target");
        let changed = target != self.current;
        if changed {
            self.back_stack.push(self.current);
            self.switch_to(target);
        }
        TransitionResult {
            consumed: true,
            new_screen: changed.then(|| rule.goto.clone()),
            side_effect: rule.side_effect.clone(),
        }
    }

    fn go_back(&mut self) -> TransitionResult {
        match self.back_stack.pop() {
            Some(prev) => {
                self.switch_to(prev);
                TransitionResult {
                    consumed: true,
                    new_screen: Some(self.screen_id().to_string()),
                    side_effect: None,
                }
            }
            None => TransitionResult::default(),
        }
    }

    /// The simulator hosts a single app, so "home" returns to its start
    /// screen with a cleared back stack.
    fn go_home(&mut self) -> TransitionResult {
        let start = self
            .app
            .screens
            .iter()
            .position(|s| s.id == self.app.start_screen)
            .expect("validated start screen");
        self.back_stack.clear();
        if start == self.current {
            return TransitionResult::default();
        }
        self.switch_to(start);
        TransitionResult {
            consumed: true,
            new_screen: Some(self.screen_id().to_string()),
            side_effect: None,
        }
    }

    fn switch_to(&mut self, screen: usize) {
        self.current = screen;
        let root = &self.app.screens[screen].root;
        self.tree = assign_indices(root);
        self.framebuffer = render_tree(root, self.display.width, self.display.height);
    }
}
