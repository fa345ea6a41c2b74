//! JSON messages exchanged with the overlay UI, one per WebSocket text frame.
//!
//! Server to client: `overlay` (show a frame) and `dismiss`. Client to
//! server: `touch`, `text_reply` and `ack`. Touch coordinates are local to
//! the image they land on: the full-screen image, or the tile named by
//! `tile_id`.

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{FrameMode, FrameVisual, OverlayFrame};
use crate::a11y::Rect;
use crate::action::VisualKind;
use crate::device::Framebuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFull {
    pub w: u32,
    pub h: u32,
    pub scale: f64,
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireTile {
    pub tile_id: u32,
    pub crop: Rect,
    pub scale: f64,
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireVisual {
    pub kind: VisualKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<WireFull>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiles: Option<Vec<WireTile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub html: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Overlay {
        frame_id: u64,
        mode: FrameMode,
        text: String,
        visual: WireVisual,
    },
    Dismiss {
        frame_id: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Touch {
        frame_id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tile_id: Option<u32>,
        u: i64,
        v: i64,
    },
    TextReply {
        frame_id: u64,
        text: String,
    },
    Ack {
        frame_id: u64,
    },
}

impl ClientMessage {
    pub fn frame_id(&self) -> u64 {
        match self {
            ClientMessage::Touch { frame_id, .. }
            | ClientMessage::TextReply { frame_id, .. }
            | ClientMessage::Ack { frame_id } => *frame_id,
        }
    }
}

/// Encodes an RGB framebuffer as PNG.
pub fn encode_png(fb: &Framebuffer) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, fb.width(), fb.height());
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().expect("png header to memory");
    w.write_image_data(fb.pixels()).expect("png data to memory");
    w.finish().expect("png finish to memory");
    out
}

fn png_b64(fb: &Framebuffer) -> String {
    base64::engine::general_purpose::STANDARD.encode(encode_png(fb))
}

impl ServerMessage {
    pub fn from_frame(frame: &OverlayFrame) -> ServerMessage {
        let mut visual = WireVisual {
            kind: frame.visual.kind(),
            full: None,
            tiles: None,
            html: None,
        };
        match &frame.visual {
            FrameVisual::None => {}
            FrameVisual::Full(f) => {
                visual.full = Some(WireFull {
                    w: f.image.width(),
                    h: f.image.height(),
                    scale: f.scale.as_f64(),
                    png_base64: png_b64(&f.image),
                })
            }
            FrameVisual::Partial(tiles) => {
                visual.tiles = Some(
                    tiles
                        .iter()
                        .map(|t| WireTile {
                            tile_id: t.tile_id,
                            crop: t.crop,
                            scale: t.scale.as_f64(),
                            png_base64: png_b64(&t.image),
                        })
                        .collect(),
                )
            }
            FrameVisual::Genui(html) => visual.html = Some(html.clone()),
        }
        ServerMessage::Overlay {
            frame_id: frame.frame_id,
            mode: frame.mode,
            text: frame.text.clone(),
            visual,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serialization is infallible")
    }
}
