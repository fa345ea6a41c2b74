use crate::a11y::{A11yNode, Rect};

/// Row-major RGB framebuffer.
#[derive(Clone, PartialEq, Eq)]
pub struct Framebuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Framebuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Framebuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Framebuffer {
    /// A black buffer.
    pub fn new(width: u32, height: u32) -> Self {
        Framebuffer {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 3],
        }
    }

    /// Wraps raw RGB bytes. Returns `None` when the length does not match.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == width as usize * height as usize * 3).then_some(Framebuffer {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Fills `rect` clipped to the buffer.
    pub fn fill_rect(&mut self, rect: Rect, rgb: [u8; 3]) {
        let right = rect.right.min(self.width);
        let bottom = rect.bottom.min(self.height);
        if rect.left >= right || rect.top >= bottom {
            return;
        }
        let stride = self.width as usize * 3;
        for y in rect.top..bottom {
            let row = &mut self.pixels[y as usize * stride..(y as usize + 1) * stride];
            for px in row[rect.left as usize * 3..right as usize * 3].chunks_exact_mut(3) {
                px.copy_from_slice(&rgb);
            }
        }
    }
}

/// Fill color for a node: FNV-1a over the id bytes, top byte folded into the
/// low 24 bits.
pub fn node_color(id: &str) -> [u8; 3] {
    let mut h: u32 = 0x811c_9dc5;
    for b in id.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    let c = (h ^ (h >> 24)) & 0x00ff_ffff;
    [(c >> 16) as u8, (c >> 8) as u8, c as u8]
}

/// Paints every node as a flat rectangle in document order, children over
/// parents, on a black background.
pub fn render_tree(root: &A11yNode, width: u32, height: u32) -> Framebuffer {
    let mut fb = Framebuffer::new(width, height);
    for node in root.iter() {
        fb.fill_rect(node.bounds, node_color(&node.id));
    }
    fb
}
