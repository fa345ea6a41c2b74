//! Headless stand-in for the person holding the phone.

use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::action::VisualKind;
use crate::agent::OverlayPort;
use crate::device::AppDefinition;
use crate::overlay::{ClientMessage, FrameMode, FrameVisual, OverlayError, OverlayFrame};

/// One scripted user event answering an `ask`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ReplyEvent {
    /// Type a reply.
    Text { text: String },
    /// Tap the centre of an app node, wherever the frame shows it.
    Tap { tap: String },
    /// Raw touch in frame-local pixels.
    Touch {
        #[serde(default)]
        tile_id: Option<u32>,
        u: i64,
        v: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub mode: FrameMode,
    pub kind: VisualKind,
}

/// Acks every `speak` at once and answers each `ask` with the next batch
/// of scripted events.
#[derive(Debug, Clone)]
pub struct AutoResponder {
    app: AppDefinition,
    replies: VecDeque<Vec<ReplyEvent>>,
    pending: VecDeque<ClientMessage>,
    frames: Vec<FrameRecord>,
    dismissed: Vec<u64>,
}

impl AutoResponder {
    pub fn new(app: AppDefinition, replies: impl IntoIterator<Item = Vec<ReplyEvent>>) -> Self {
        AutoResponder {
            app,
            replies: replies.into_iter().collect(),
            pending: VecDeque::new(),
            frames: Vec::new(),
            dismissed: Vec::new(),
        }
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn dismissed(&self) -> &[u64] {
        &self.dismissed
    }

    fn locate(&self, frame: &OverlayFrame, node_id: &str) -> Result<(Option<u32>, i64, i64), OverlayError> {
        let missing = |why: &str| OverlayError::Protocol(format!("cannot tap {node_id:?}: {why}"));
        let (_, node) = self
            .app
            .find_node(node_id)
            .ok_or_else(|| missing("no such node"))?;
        let (x, y) = node.bounds.center();
        match &frame.visual {
            FrameVisual::Full(f) => {
                let (u, v) = f.project(x, y);
                Ok((None, u as i64, v as i64))
            }
            FrameVisual::Partial(tiles) => tiles
                .iter()
                .find(|t| t.crop.contains_point(x as i64, y as i64))
                .map(|t| {
                    let (u, v) = t.project(x, y);
                    (Some(t.tile_id), u as i64, v as i64)
                })
                .ok_or_else(|| missing("not inside any tile")),
            _ => Err(missing("frame shows no app pixels")),
        }
    }
}

impl OverlayPort for AutoResponder {
    fn is_connected(&self) -> bool {
        true
    }

    fn present(&mut self, frame: &OverlayFrame) -> Result<(), OverlayError> {
        self.frames.push(FrameRecord {
            frame_id: frame.frame_id,
            mode: frame.mode,
            kind: frame.visual.kind(),
        });
        let frame_id = frame.frame_id;
        self.pending.clear();
        if frame.mode == FrameMode::Speak {
            self.pending.push_back(ClientMessage::Ack { frame_id });
            return Ok(());
        }
        let events = self.replies.pop_front().unwrap_or_default();
        for ev in events {
            let msg = match ev {
                ReplyEvent::Text { text } => ClientMessage::TextReply { frame_id, text },
                ReplyEvent::Touch { tile_id, u, v } => ClientMessage::Touch {
                    frame_id,
                    tile_id,
                    u,
                    v,
                },
                ReplyEvent::Tap { tap } => {
                    let (tile_id, u, v) = self.locate(frame, &tap)?;
                    ClientMessage::Touch {
                        frame_id,
                        tile_id,
                        u,
                        v,
                    }
                }
            };
            self.pending.push_back(msg);
        }
        Ok(())
    }

    fn dismiss(&mut self, frame_id: u64) -> Result<(), OverlayError> {
        self.dismissed.push(frame_id);
        Ok(())
    }

    fn next_event(&mut self, _timeout: Duration) -> Result<Option<ClientMessage>, OverlayError> {
        Ok(self.pending.pop_front())
    }
}
