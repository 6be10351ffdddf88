//! Glyph sources for placement metrics and rasterization.
//!
//! A glyph lives in a box `advance × px_size`; `u` runs along the baseline
//! from the box's left edge and `v` runs downward from the box's top edge.
//! Providers must only report ink strictly inside that box so that
//! non-overlapping label footprints never share a pixel.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use crate::geodata::{GeoError, FONT_SET_SIZE};

pub trait GlyphProvider: Send + Sync {
    /// Horizontal advance in pixels, `None` when the font has no such glyph.
    fn advance(&self, font_id: u8, ch: char, px_size: f64) -> Option<f64>;

    /// Ink coverage at glyph-box coordinate `(u, v)`.
    fn covers(&self, font_id: u8, ch: char, px_size: f64, u: f64, v: f64) -> bool;

    /// Stable identity of the glyph source (recorded in dataset manifests).
    fn fingerprint(&self) -> String;
}

/// Advance used for characters the provider cannot render.
pub fn tofu_advance(px_size: f64) -> f64 {
    0.6 * px_size
}

/// Hollow box drawn in place of a missing glyph.
pub fn tofu_covers(px_size: f64, u: f64, v: f64) -> bool {
    let w = tofu_advance(px_size);
    let (x0, x1) = (0.12 * w, 0.88 * w);
    let (y0, y1) = (0.15 * px_size, 0.85 * px_size);
    let t = (0.08 * px_size).max(1.0);
    let inside = u >= x0 && u <= x1 && v >= y0 && v <= y1;
    let hollow = u > x0 + t && u < x1 - t && v > y0 + t && v < y1 - t;
    inside && !hollow
}

/// Whether `ch` occupies a glyph slot (control characters do not).
pub fn is_renderable(ch: char) -> bool {
    !ch.is_control()
}

// Rows top to bottom, bit 4 is the leftmost column.
const GLYPHS: [[u8; 7]; 95] = [
    [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00], // ' '
    [0x04, 0x04, 0x04, 0x04, 0x00, 0x00, 0x04], // !
    [0x0A, 0x0A, 0x0A, 0x00, 0x00, 0x00, 0x00], // "
    [0x0A, 0x0A, 0x1F, 0x0A, 0x1F, 0x0A, 0x0A], // #
    [0x04, 0x0F, 0x14, 0x0E, 0x05, 0x1E, 0x04], // $
    [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03], // %
    [0x0C, 0x12, 0x14, 0x08, 0x15, 0x12, 0x0D], // &
    [0x0C, 0x04, 0x08, 0x00, 0x00, 0x00, 0x00], // '
    [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02], // (
    [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08], // )
    [0x00, 0x04, 0x15, 0x0E, 0x15, 0x04, 0x00], // *
    [0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00], // +
    [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08], // ,
    [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00], // -
    [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C], // .
    [0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00], // /
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E], // 0
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E], // 1
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F], // 2
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E], // 3
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02], // 4
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E], // 5
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E], // 6
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08], // 7
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E], // 8
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C], // 9
    [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00], // :
    [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x04, 0x08], // ;
    [0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02], // <
    [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00], // =
    [0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08], // >
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04], // ?
    [0x0E, 0x11, 0x01, 0x0D, 0x15, 0x15, 0x0E], // @
    [0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11], // A
    [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E], // B
    [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E], // C
    [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C], // D
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F], // E
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10], // F
    [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F], // G
    [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11], // H
    [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E], // I
    [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C], // J
    [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11], // K
    [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F], // L
    [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11], // M
    [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11], // N
    [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], // O
    [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10], // P
    [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D], // Q
    [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11], // R
    [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E], // S
    [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04], // T
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], // U
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04], // V
    [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A], // W
    [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11], // X
    [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04], // Y
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F], // Z
    [0x0E, 0x08, 0x08, 0x08, 0x08, 0x08, 0x0E], // [
    [0x00, 0x10, 0x08, 0x04, 0x02, 0x01, 0x00], // backslash
    [0x0E, 0x02, 0x02, 0x02, 0x02, 0x02, 0x0E], // ]
    [0x04, 0x0A, 0x11, 0x00, 0x00, 0x00, 0x00], // ^
    [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F], // _
    [0x08, 0x04, 0x02, 0x00, 0x00, 0x00, 0x00], // `
    [0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F], // a
    [0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x1E], // b
    [0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E], // c
    [0x01, 0x01, 0x0D, 0x13, 0x11, 0x11, 0x0F], // d
    [0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E], // e
    [0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08], // f
    [0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E], // g
    [0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11], // h
    [0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E], // i
    [0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C], // j
    [0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12], // k
    [0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E], // l
    [0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11], // m
    [0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11], // n
    [0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E], // o
    [0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10], // p
    [0x00, 0x00, 0x0D, 0x13, 0x0F, 0x01, 0x01], // q
    [0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10], // r
    [0x00, 0x00, 0x0E, 0x10, 0x0E, 0x01, 0x1E], // s
    [0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06], // t
    [0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D], // u
    [0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04], // v
    [0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0A], // w
    [0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11], // x
    [0x00, 0x00, 0x11, 0x11, 0x0F, 0x01, 0x0E], // y
    [0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F], // z
    [0x02, 0x04, 0x04, 0x08, 0x04, 0x04, 0x02], // {
    [0x04, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04], // |
    [0x08, 0x04, 0x04, 0x02, 0x04, 0x04, 0x08], // }
    [0x00, 0x00, 0x00, 0x0D, 0x12, 0x00, 0x00], // ~
];

const CELL_COLS: f64 = 6.0;
const CELL_ROWS: f64 = 9.0;

/// Deterministic 5×7 bitmap font covering printable ASCII, scaled to any
/// pixel size. The sixteen font ids select combinations of width scale,
/// emboldening and slant.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinFont;

#[derive(Debug, Clone, Copy)]
struct Variant {
    width: f64,
    bold: bool,
    slant: f64,
}

impl BuiltinFont {
    fn variant(font_id: u8) -> Variant {
        let id = font_id % 16;
        Variant {
            width: [0.8, 1.0, 1.2, 1.4][(id % 4) as usize],
            bold: id & 4 != 0,
            slant: if id & 8 != 0 { 0.12 } else { 0.0 },
        }
    }

    fn bitmap(ch: char) -> Option<&'static [u8; 7]> {
        let code = ch as u32;
        (32..127).contains(&code).then(|| &GLYPHS[(code - 32) as usize])
    }

    /// Whether the bitmap font has `ch` at all.
    pub fn has_glyph(ch: char) -> bool {
        Self::bitmap(ch).is_some()
    }
}

impl GlyphProvider for BuiltinFont {
    fn advance(&self, font_id: u8, ch: char, px_size: f64) -> Option<f64> {
        Self::bitmap(ch)?;
        Some(CELL_COLS * px_size / CELL_ROWS * Self::variant(font_id).width)
    }

    fn covers(&self, font_id: u8, ch: char, px_size: f64, u: f64, v: f64) -> bool {
        let Some(rows) = Self::bitmap(ch) else {
            return false;
        };
        let var = Self::variant(font_id);
        let cell_h = px_size / CELL_ROWS;
        let cell_w = cell_h * var.width;
        if u <= 0.0 || v <= 0.0 || u >= CELL_COLS * cell_w || v >= px_size {
            return false;
        }
        let row = (v / cell_h).floor() - 1.0;
        if !(0.0..7.0).contains(&row) {
            return false;
        }
        // shear about the baseline (bottom of row 6)
        let lift = (8.0 * cell_h - v) / cell_h;
        let u = u - var.slant * lift * cell_w;
        let hit = |u: f64| {
            let col = (u / cell_w).floor();
            (0.0..5.0).contains(&col) && rows[row as usize] & (0x10 >> col as u8) != 0
        };
        hit(u) || (var.bold && hit(u - 0.45 * cell_w))
    }

    fn fingerprint(&self) -> String {
        "builtin-5x7".to_string()
    }
}

struct RasterGlyph {
    advance: f64,
    // bitmap origin in glyph-box coordinates
    left: f64,
    top: f64,
    width: usize,
    height: usize,
    coverage: Vec<u8>,
}

type GlyphCache = Mutex<HashMap<(u8, char, u64), Option<Arc<RasterGlyph>>>>;

/// Sixteen TrueType/OpenType fonts loaded from a font-set configuration.
pub struct FontSetProvider {
    fonts: Vec<fontdue::Font>,
    // em size per pixel of line height, per font
    em_per_px: Vec<f64>,
    ascent_frac: Vec<f64>,
    fingerprint: String,
    cache: GlyphCache,
}

impl FontSetProvider {
    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self, GeoError> {
        if paths.len() != FONT_SET_SIZE {
            return Err(GeoError::FontSet(format!(
                "expected {FONT_SET_SIZE} fonts, got {}",
                paths.len()
            )));
        }
        let mut hasher = Sha256::new();
        let mut fonts = Vec::new();
        let mut em_per_px = Vec::new();
        let mut ascent_frac = Vec::new();
        for p in paths {
            let p = p.as_ref();
            let bytes = std::fs::read(p)
                .map_err(|e| GeoError::FontSet(format!("{}: {e}", p.display())))?;
            hasher.update(&bytes);
            let font = fontdue::Font::from_bytes(bytes, fontdue::FontSettings::default())
                .map_err(|e| GeoError::FontSet(format!("{}: {e}", p.display())))?;
            let lm = font
                .horizontal_line_metrics(1.0)
                .ok_or_else(|| GeoError::FontSet(format!("{}: no horizontal metrics", p.display())))?;
            let line = (lm.ascent - lm.descent) as f64;
            em_per_px.push(1.0 / line);
            ascent_frac.push(lm.ascent as f64 / line);
            fonts.push(font);
        }
        Ok(Self {
            fonts,
            em_per_px,
            ascent_frac,
            fingerprint: hex::encode(hasher.finalize()),
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn glyph(&self, font_id: u8, ch: char, px_size: f64) -> Option<Arc<RasterGlyph>> {
        let idx = font_id as usize % self.fonts.len();
        let key = (font_id, ch, px_size.to_bits());
        if let Some(g) = self.cache.lock().unwrap().get(&key) {
            return g.clone();
        }
        let font = &self.fonts[idx];
        let g = if font.has_glyph(ch) {
            let em = (px_size * self.em_per_px[idx]) as f32;
            let (m, coverage) = font.rasterize(ch, em);
            let baseline = px_size * self.ascent_frac[idx];
            Some(Arc::new(RasterGlyph {
                advance: m.advance_width as f64,
                left: m.xmin as f64,
                top: baseline - (m.ymin as f64 + m.height as f64),
                width: m.width,
                height: m.height,
                coverage,
            }))
        } else {
            None
        };
        self.cache.lock().unwrap().insert(key, g.clone());
        g
    }
}

impl GlyphProvider for FontSetProvider {
    fn advance(&self, font_id: u8, ch: char, px_size: f64) -> Option<f64> {
        if ch == ' ' {
            let idx = font_id as usize % self.fonts.len();
            let em = (px_size * self.em_per_px[idx]) as f32;
            return Some(self.fonts[idx].metrics(' ', em).advance_width as f64);
        }
        self.glyph(font_id, ch, px_size).map(|g| g.advance.max(1.0))
    }

    fn covers(&self, font_id: u8, ch: char, px_size: f64, u: f64, v: f64) -> bool {
        let Some(g) = self.glyph(font_id, ch, px_size) else {
            return false;
        };
        if u <= 0.0 || v <= 0.0 || u >= g.advance || v >= px_size {
            return false;
        }
        let col = (u - g.left).floor();
        let row = (v - g.top).floor();
        if col < 0.0 || row < 0.0 || col >= g.width as f64 || row >= g.height as f64 {
            return false;
        }
        g.coverage[row as usize * g.width + col as usize] >= 128
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}
