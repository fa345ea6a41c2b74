//! Overlay engine: turns a `speak`/`ask` visualization into a frame the user
//! sees, and maps touches on that frame back into device coordinates.
//!
//! All scaling uses exact rational factors, so a frame built twice from the
//! same framebuffer is bit-identical.

mod genui;
mod protocol;
mod server;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::a11y::{A11yError, IndexedTree, Rect};
use crate::action::VisualKind;
use crate::device::Framebuffer;

pub use genui::{genui_html, sanitize_markup, DISCLOSURE_BANNER};
pub use protocol::{encode_png, ClientMessage, ServerMessage, WireFull, WireTile, WireVisual};
pub use server::{OverlayServer, OverlaySession};

/// Vertical gap between stacked partial tiles, in overlay pixels.
pub const TILE_GUTTER: u32 = 8;

/// Tiles are never shrunk below this factor; past it the viewport counts
/// as exhausted.
pub const MIN_TILE_SCALE: Scale = Scale { num: 1, den: 5 };

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverlayError {
    #[error("viewport exhausted: tile {tile} would need a scale below 1/5")]
    ViewportExhausted { tile: usize },
    #[error("crop {0} is empty or outside the framebuffer")]
    EmptyCrop(Rect),
    #[error("generated markup rejected: {0}")]
    RejectedMarkup(String),
    #[error("overlay unavailable: {0}")]
    Unavailable(String),
    #[error("overlay protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    UnknownIndex(#[from] A11yError),
    #[error("touches on {0:?} frames are not forwarded to the device")]
    NotForwardable(VisualKind),
    #[error("touch ({u}, {v}) is outside the image")]
    OutOfTile { u: i64, v: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Viewport {
    pub width: u32,
    pub height: u32,
}

impl Viewport {
    pub const DEFAULT: Viewport = Viewport {
        width: 540,
        height: 1200,
    };
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A positive rational scale factor, always stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scale {
    num: u64,
    den: u64,
}

impl Scale {
    pub const ONE: Scale = Scale { num: 1, den: 1 };

    /// # Panics
    /// If either part is zero.
    pub fn new(num: u64, den: u64) -> Scale {
        assert!(num > 0 && den > 0, "scale must be positive");
        let g = gcd(num, den);
        Scale {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `round(len * s)`, halves rounded up.
    pub fn apply(self, len: u64) -> u64 {
        (2 * len * self.num + self.den) / (2 * self.den)
    }

    /// `round(len / s)`, halves rounded up.
    pub fn invert(self, len: u64) -> u64 {
        (2 * len * self.den + self.num) / (2 * self.num)
    }

    pub fn min(self, other: Scale) -> Scale {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Scale {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scale {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    Speak,
    Ask,
}

/// The whole screen, scaled to fit and centred (letterboxed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullView {
    pub scale: Scale,
    /// Framebuffer size the image was scaled from.
    pub src_size: (u32, u32),
    /// Top-left of the image inside the viewport.
    pub offset: (u32, u32),
    pub image: Framebuffer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub tile_id: u32,
    /// Source region in device pixels.
    pub crop: Rect,
    pub scale: Scale,
    /// Where the tile sits inside the viewport.
    pub dest: Rect,
    pub image: Framebuffer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameVisual {
    None,
    Full(FullView),
    Partial(Vec<Tile>),
    Genui(String),
}

impl FrameVisual {
    pub fn kind(&self) -> VisualKind {
        match self {
            FrameVisual::None => VisualKind::None,
            FrameVisual::Full(_) => VisualKind::Full,
            FrameVisual::Partial(_) => VisualKind::Partial,
            FrameVisual::Genui(_) => VisualKind::Genui,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayFrame {
    pub frame_id: u64,
    pub mode: FrameMode,
    pub text: String,
    pub visual: FrameVisual,
}

fn clamp_to(v: u64, lo: u32, hi_excl: u32) -> u32 {
    (v.max(lo as u64)).min(hi_excl as u64 - 1) as u32
}

/// Nearest-neighbour resample of `crop` at `scale`.
fn resample(fb: &Framebuffer, crop: Rect, scale: Scale, w: u32, h: u32) -> Framebuffer {
    let xs: Vec<u32> = (0..w)
        .map(|u| clamp_to(crop.left as u64 + scale.invert(u as u64), crop.left, crop.right))
        .collect();
    let mut out = Framebuffer::new(w, h);
    for v in 0..h {
        let y = clamp_to(crop.top as u64 + scale.invert(v as u64), crop.top, crop.bottom);
        for (u, &x) in xs.iter().enumerate() {
            out.set_pixel(u as u32, v, fb.pixel(x, y));
        }
    }
    out
}

fn scaled_len(scale: Scale, len: u32) -> u32 {
    scale.apply(len as u64).max(1) as u32
}

/// Full-screen mirror: the largest scale at which the framebuffer fits.
pub fn full_view(fb: &Framebuffer, viewport: Viewport) -> FullView {
    let scale = Scale::new(viewport.width as u64, fb.width() as u64)
        .min(Scale::new(viewport.height as u64, fb.height() as u64));
    let w = scaled_len(scale, fb.width()).min(viewport.width);
    let h = scaled_len(scale, fb.height()).min(viewport.height);
    let full = Rect::new(0, 0, fb.width(), fb.height());
    FullView {
        scale,
        src_size: (fb.width(), fb.height()),
        offset: ((viewport.width - w) / 2, (viewport.height - h) / 2),
        image: resample(fb, full, scale, w, h),
    }
}

/// Partial mirror: one tile per crop, stacked top to bottom with
/// [`TILE_GUTTER`] between them. Tiles are never enlarged.
pub fn layout_tiles(
    fb: &Framebuffer,
    crops: &[Rect],
    viewport: Viewport,
) -> Result<Vec<Tile>, OverlayError> {
    let bounds = Rect::new(0, 0, fb.width(), fb.height());
    let mut tiles = Vec::with_capacity(crops.len());
    let mut y = 0u32;
    for (i, &crop) in crops.iter().enumerate() {
        if crop.is_empty() || !bounds.contains_rect(&crop) {
            return Err(OverlayError::EmptyCrop(crop));
        }
        let remaining = viewport.height.saturating_sub(y);
        if remaining == 0 {
            return Err(OverlayError::ViewportExhausted { tile: i });
        }
        let scale = Scale::new(viewport.width as u64, crop.width() as u64)
            .min(Scale::new(remaining as u64, crop.height() as u64))
            .min(Scale::ONE);
        if scale < MIN_TILE_SCALE {
            return Err(OverlayError::ViewportExhausted { tile: i });
        }
        let w = scaled_len(scale, crop.width()).min(viewport.width);
        let h = scaled_len(scale, crop.height()).min(remaining);
        let x = (viewport.width - w) / 2;
        tiles.push(Tile {
            tile_id: i as u32,
            crop,
            scale,
            dest: Rect::new(x, y, x + w, y + h),
            image: resample(fb, crop, scale, w, h),
        });
        y = y + h + TILE_GUTTER;
    }
    Ok(tiles)
}

pub fn make_full_frame(
    shot: &Framebuffer,
    viewport: Viewport,
    mode: FrameMode,
    text: impl Into<String>,
) -> OverlayFrame {
    OverlayFrame {
        frame_id: 0,
        mode,
        text: text.into(),
        visual: FrameVisual::Full(full_view(shot, viewport)),
    }
}

/// Crops the elements carrying `indices`, in request order.
pub fn make_partial_frame(
    shot: &Framebuffer,
    tree: &IndexedTree,
    indices: &[u32],
    viewport: Viewport,
    mode: FrameMode,
    text: impl Into<String>,
) -> Result<OverlayFrame, OverlayError> {
    let crops = tree.resolve_regions(indices)?;
    Ok(OverlayFrame {
        frame_id: 0,
        mode,
        text: text.into(),
        visual: FrameVisual::Partial(layout_tiles(shot, &crops, viewport)?),
    })
}

/// Sanitizes generated markup into a GenUI frame headed by the disclosure
/// banner.
pub fn make_genui_frame(
    html: &str,
    mode: FrameMode,
    text: impl Into<String>,
) -> Result<OverlayFrame, OverlayError> {
    Ok(OverlayFrame {
        frame_id: 0,
        mode,
        text: text.into(),
        visual: FrameVisual::Genui(genui_html(html)?),
    })
}

/// Maps an overlay touch to device coordinates.
///
/// For full frames `(u, v)` are viewport coordinates; for partial frames
/// they are local to the tile named by `tile_id`.
pub fn map_touch(
    frame: &OverlayFrame,
    tile_id: Option<u32>,
    u: i64,
    v: i64,
) -> Result<(i64, i64), OverlayError> {
    let outside = OverlayError::OutOfTile { u, v };
    match &frame.visual {
        FrameVisual::Full(f) => {
            let (ox, oy) = (f.offset.0 as i64, f.offset.1 as i64);
            let (w, h) = (f.image.width() as i64, f.image.height() as i64);
            if u < ox || v < oy || u >= ox + w || v >= oy + h {
                return Err(outside);
            }
            Ok(f.map_touch(u - ox, v - oy))
        }
        FrameVisual::Partial(tiles) => {
            let tile = match tile_id {
                Some(id) => tiles.iter().find(|t| t.tile_id == id),
                None if tiles.len() == 1 => tiles.first(),
                None => None,
            }
            .ok_or(outside.clone())?;
            if u < 0 || v < 0 || u >= tile.image.width() as i64 || v >= tile.image.height() as i64 {
                return Err(outside);
            }
            Ok(tile.map_touch(u, v))
        }
        other => Err(OverlayError::NotForwardable(other.kind())),
    }
}

impl FullView {
    /// Image-local point to device point, clamped into the framebuffer.
    pub fn map_touch(&self, u: i64, v: i64) -> (i64, i64) {
        let map = |p: i64, len: u32| clamp_to(self.scale.invert(p.max(0) as u64), 0, len) as i64;
        (map(u, self.src_size.0), map(v, self.src_size.1))
    }

    /// Device point to image-local coordinates, clamped into the image.
    pub fn project(&self, x: u32, y: u32) -> (u32, u32) {
        (
            clamp_to(self.scale.apply(x as u64), 0, self.image.width()),
            clamp_to(self.scale.apply(y as u64), 0, self.image.height()),
        )
    }
}

impl Tile {
    /// Tile-local point to device point, clamped into the crop.
    pub fn map_touch(&self, u: i64, v: i64) -> (i64, i64) {
        let map = |p: i64, lo: u32, hi: u32| {
            clamp_to(lo as u64 + self.scale.invert(p.max(0) as u64), lo, hi) as i64
        };
        (
            map(u, self.crop.left, self.crop.right),
            map(v, self.crop.top, self.crop.bottom),
        )
    }

    /// Device point (inside the crop) to tile-local coordinates, clamped
    /// into the tile.
    pub fn project(&self, x: u32, y: u32) -> (u32, u32) {
        let map = |p: u32, lo: u32, len: u32| {
            clamp_to(self.scale.apply(p.saturating_sub(lo) as u64), 0, len)
        };
        (
            map(x, self.crop.left, self.image.width()),
            map(y, self.crop.top, self.image.height()),
        )
    }
}
