//! Text-layer rendering, compositing and augmentation.
//!
//! The colored layer paints every label in its own exact RGB with hard
//! alpha, so a label's pixels can be recovered by color match. The gray
//! layer repaints the same pixels in a single ink color for compositing onto
//! the map background.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbaImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::font::{tofu_advance, tofu_covers, GlyphProvider};
use crate::geodata::TileAddress;
use crate::geom::Point;
use crate::placement::{GlyphPose, PlacedLabel};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Rgb = [u8; 3];

/// Row-major 8-bit RGBA raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub address: Option<TileAddress>,
}

impl TileImage {
    /// Fully transparent image.
    pub fn transparent(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 4],
            address: None,
        }
    }

    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        let mut img = Self::transparent(width, height);
        for px in img.pixels.chunks_exact_mut(4) {
            px.copy_from_slice(&rgba);
        }
        img
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if pixels.len() != width as usize * height as usize * 4 {
            return Err(RasterError::Argument(format!(
                "{} samples for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            address: None,
        })
    }

    pub fn with_address(mut self, address: TileAddress) -> Self {
        self.address = Some(address);
        self
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 4] {
        let i = self.idx(x, y);
        [
            self.pixels[i],
            self.pixels[i + 1],
            self.pixels[i + 2],
            self.pixels[i + 3],
        ]
    }

    pub fn put(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let i = self.idx(x, y);
        self.pixels[i..i + 4].copy_from_slice(&rgba);
    }

    /// Pixels with non-zero alpha.
    pub fn opaque_mask(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.pixels.chunks_exact(4).map(|p| p[3] != 0).collect(),
        }
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgba8();
        let (w, h) = img.dimensions();
        Self::from_raw(w, h, img.into_raw())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let img = RgbaImage::from_raw(self.width, self.height, self.pixels.clone())
            .ok_or_else(|| RasterError::Argument("sample count mismatch".into()))?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn read_png(path: &Path) -> Result<Self, RasterError> {
        Self::decode_png(&std::fs::read(path)?)
    }

    pub fn write_png(&self, path: &Path) -> Result<(), RasterError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Bijection between label color indices and RGB triples. Index `n` encodes
/// as the 24-bit integer `n` split into bytes, skipping the code equal to the
/// ink color. Index 0 is the transparent "no label" sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorIndexMap {
    ink_code: u32,
}

impl Default for ColorIndexMap {
    fn default() -> Self {
        Self::new([0, 0, 0])
    }
}

impl ColorIndexMap {
    pub const MAX_INDEX: u32 = (1 << 24) - 2;

    pub fn new(ink: Rgb) -> Self {
        Self {
            ink_code: (ink[0] as u32) << 16 | (ink[1] as u32) << 8 | ink[2] as u32,
        }
    }

    pub fn color(&self, index: u32) -> Option<Rgb> {
        if index == 0 || index > Self::MAX_INDEX {
            return None;
        }
        let code = if self.ink_code != 0 && index >= self.ink_code {
            index + 1
        } else {
            index
        };
        Some([(code >> 16) as u8, (code >> 8) as u8, code as u8])
    }

    pub fn index_of(&self, rgb: Rgb) -> Option<u32> {
        let code = (rgb[0] as u32) << 16 | (rgb[1] as u32) << 8 | rgb[2] as u32;
        if code == 0 || (self.ink_code != 0 && code == self.ink_code) {
            return None;
        }
        Some(if self.ink_code != 0 && code > self.ink_code {
            code - 1
        } else {
            code
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    /// Glyphs drawn as a tofu box because the provider lacked them.
    pub tofu: usize,
}

/// Pose geometry: maps an image point into glyph-box coordinates.
struct GlyphFrame {
    anchor: Point,
    dir: Point,
    normal: Point,
    advance: f64,
    px: f64,
}

impl GlyphFrame {
    fn new(pose: &GlyphPose, px: f64) -> Self {
        let (s, c) = pose.rotation.sin_cos();
        Self {
            anchor: pose.anchor,
            dir: Point::new(c, s),
            normal: Point::new(-s, c),
            advance: pose.advance,
            px,
        }
    }

    fn local(&self, p: Point) -> (f64, f64) {
        let d = p.sub(self.anchor);
        (
            d.x * self.dir.x + d.y * self.dir.y + self.advance / 2.0,
            d.x * self.normal.x + d.y * self.normal.y + self.px / 2.0,
        )
    }

    fn pixel_range(&self, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        let hw = self.advance / 2.0;
        let hh = self.px / 2.0;
        let ext_x = hw * self.dir.x.abs() + hh * self.normal.x.abs();
        let ext_y = hw * self.dir.y.abs() + hh * self.normal.y.abs();
        let x0 = (self.anchor.x - ext_x).floor().max(0.0);
        let y0 = (self.anchor.y - ext_y).floor().max(0.0);
        let x1 = (self.anchor.x + ext_x).ceil().min(width as f64 - 1.0);
        let y1 = (self.anchor.y + ext_y).ceil().min(height as f64 - 1.0);
        (x1 >= x0 && y1 >= y0).then_some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }
}

/// Calls `ink(x, y, coverage)` for every pixel a label touches; `samples`
/// per axis controls supersampling (1 = hard point sampling at the pixel
/// center). Returns the number of tofu glyphs.
fn rasterize_label<F: FnMut(u32, u32, f64)>(
    label: &PlacedLabel,
    provider: &dyn GlyphProvider,
    width: u32,
    height: u32,
    samples: u32,
    mut ink: F,
) -> usize {
    let px = label.px_size;
    let font = label.font.font_id;
    let mut tofu = 0;
    for pose in &label.poses {
        let missing = provider.advance(font, pose.ch, px).is_none();
        if missing {
            tofu += 1;
        }
        let frame = GlyphFrame::new(pose, px);
        let Some((x0, y0, x1, y1)) = frame.pixel_range(width, height) else {
            continue;
        };
        let covers = |u: f64, v: f64| {
            if missing {
                tofu_covers(px, u * tofu_advance(px) / pose.advance.max(1e-9), v)
            } else {
                provider.covers(font, pose.ch, px, u, v)
            }
        };
        for y in y0..=y1 {
            for x in x0..=x1 {
                let cov = if samples <= 1 {
                    let (u, v) = frame.local(Point::new(x as f64, y as f64));
                    if covers(u, v) {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let mut hit = 0u32;
                    for sy in 0..samples {
                        for sx in 0..samples {
                            let p = Point::new(
                                x as f64 - 0.5 + (sx as f64 + 0.5) / samples as f64,
                                y as f64 - 0.5 + (sy as f64 + 0.5) / samples as f64,
                            );
                            let (u, v) = frame.local(p);
                            if covers(u, v) {
                                hit += 1;
                            }
                        }
                    }
                    hit as f64 / (samples * samples) as f64
                };
                if cov > 0.0 {
                    ink(x, y, cov);
                }
            }
        }
    }
    tofu
}

/// Paints every label in its own index color with hard alpha; everything
/// else stays fully transparent.
pub fn render_colored_layer(
    labels: &[PlacedLabel],
    width: u32,
    height: u32,
    provider: &dyn GlyphProvider,
    colors: &ColorIndexMap,
) -> Result<(TileImage, RenderStats), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::Argument("zero-size canvas".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for l in labels {
        if l.color_index == 0 || !seen.insert(l.color_index) {
            return Err(RasterError::Argument(format!(
                "color index {} is reserved or repeated",
                l.color_index
            )));
        }
    }
    let mut img = TileImage::transparent(width, height);
    let mut stats = RenderStats::default();
    for label in labels {
        let rgb = colors
            .color(label.color_index)
            .ok_or_else(|| RasterError::Argument(format!("color index {} out of range", label.color_index)))?;
        stats.tofu += rasterize_label(label, provider, width, height, 1, |x, y, _| {
            img.put(x, y, [rgb[0], rgb[1], rgb[2], 255]);
        });
    }
    Ok((img, stats))
}

/// Repaints every opaque pixel of the colored layer in `ink`, preserving
/// alpha exactly.
pub fn render_gray_layer(colored: &TileImage, ink: Rgb) -> TileImage {
    let mut out = colored.clone();
    for px in out.pixels.chunks_exact_mut(4) {
        if px[3] == 0 {
            px.copy_from_slice(&[0, 0, 0, 0]);
        } else {
            px[..3].copy_from_slice(&ink);
        }
    }
    out
}

/// Anti-aliased single-ink text layer, rendered directly from the labels
/// with `samples × samples` supersampling. Its opaque mask is a superset of
/// the hard-alpha layer's and is not used for annotation.
pub fn render_gray_layer_antialiased(
    labels: &[PlacedLabel],
    width: u32,
    height: u32,
    provider: &dyn GlyphProvider,
    ink: Rgb,
    samples: u32,
) -> Result<TileImage, RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::Argument("zero-size canvas".into()));
    }
    let mut alpha = vec![0.0f64; width as usize * height as usize];
    for label in labels {
        rasterize_label(label, provider, width, height, samples.max(1), |x, y, c| {
            let a = &mut alpha[y as usize * width as usize + x as usize];
            *a = a.max(c);
        });
    }
    let mut img = TileImage::transparent(width, height);
    for (i, a) in alpha.into_iter().enumerate() {
        if a > 0.0 {
            let o = i * 4;
            img.pixels[o..o + 3].copy_from_slice(&ink);
            img.pixels[o + 3] = (a * 255.0).round() as u8;
        }
    }
    Ok(img)
}

/// Source-over compositing of `text` onto `background`.
pub fn composite(background: &TileImage, text: &TileImage) -> Result<TileImage, RasterError> {
    if background.width != text.width || background.height != text.height {
        return Err(RasterError::Argument(format!(
            "background {}x{} vs text {}x{}",
            background.width, background.height, text.width, text.height
        )));
    }
    let mut out = background.clone();
    for (dst, src) in out.pixels.chunks_exact_mut(4).zip(text.pixels.chunks_exact(4)) {
        match src[3] {
            0 => {}
            255 => dst.copy_from_slice(src),
            sa => {
                let sa = sa as f64 / 255.0;
                let da = dst[3] as f64 / 255.0;
                let oa = sa + da * (1.0 - sa);
                for c in 0..3 {
                    let v = (src[c] as f64 * sa + dst[c] as f64 * da * (1.0 - sa)) / oa;
                    dst[c] = v.round().clamp(0.0, 255.0) as u8;
                }
                dst[3] = (oa * 255.0).round() as u8;
            }
        }
    }
    Ok(out)
}

/// Adds seeded Gaussian noise (std `sigma`, 8-bit units) to the RGB of masked
/// pixels, one draw per pixel shared by the three channels so ink stays
/// neutral. Unmasked pixels and alpha are untouched.
pub fn add_wornout_noise(image: &TileImage, mask: &Mask, sigma: f64, seed: u64) -> Result<TileImage, RasterError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(RasterError::Argument(format!("sigma must be >= 0, got {sigma}")));
    }
    if mask.width != image.width || mask.height != image.height {
        return Err(RasterError::Argument("mask and image dimensions differ".into()));
    }
    let mut out = image.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (px, &m) in out.pixels.chunks_exact_mut(4).zip(&mask.bits) {
        if !m {
            continue;
        }
        let n: f64 = normal.sample(&mut rng);
        for c in px.iter_mut().take(3) {
            *c = (*c as f64 + n).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Stitches a 2×2 grid `[top-left, top-right, bottom-left, bottom-right]` of
/// square tiles into one image. Addresses, when present, must be adjacent.
pub fn concat_tiles(tiles: &[TileImage; 4]) -> Result<TileImage, RasterError> {
    let side = tiles[0].width;
    if side == 0 || tiles.iter().any(|t| t.width != side || t.height != side) {
        return Err(RasterError::Argument("tiles must share one square size".into()));
    }
    let addrs: Vec<_> = tiles.iter().map(|t| t.address).collect();
    if addrs.iter().any(Option::is_some) {
        let Some(base) = addrs[0] else {
            return Err(RasterError::Argument("missing top-left tile address".into()));
        };
        for (k, a) in addrs.iter().enumerate() {
            let (dx, dy) = ((k % 2) as u32, (k / 2) as u32);
            match a {
                Some(a) if a.zoom == base.zoom && a.x == base.x + dx && a.y == base.y + dy => {}
                _ => {
                    return Err(RasterError::Argument(format!(
                        "tile {k} is not adjacent to ({}, {}, {})",
                        base.zoom, base.x, base.y
                    )))
                }
            }
        }
    }
    let w = side * 2;
    let mut out = TileImage::transparent(w, w);
    for (k, tile) in tiles.iter().enumerate() {
        let ox = (k % 2) as u32 * side;
        let oy = (k / 2) as u32 * side;
        for y in 0..side {
            let src = tile.idx(0, y);
            let dst = out.idx(ox, oy + y);
            out.pixels[dst..dst + side as usize * 4]
                .copy_from_slice(&tile.pixels[src..src + side as usize * 4]);
        }
    }
    out.address = tiles[0].address;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_map_is_bijective_and_skips_ink() {
        let m = ColorIndexMap::new([40, 40, 40]);
        let ink_code = 40 << 16 | 40 << 8 | 40;
        for idx in [1, 2, 255, 256, ink_code - 1, ink_code, ink_code + 1, ColorIndexMap::MAX_INDEX] {
            let c = m.color(idx).unwrap();
            assert_ne!(c, [40, 40, 40]);
            assert_ne!(c, [0, 0, 0]);
            assert_eq!(m.index_of(c), Some(idx));
        }
        assert_eq!(m.color(0), None);
        assert_eq!(m.index_of([40, 40, 40]), None);
    }

    #[test]
    fn default_map_encodes_index_directly() {
        let m = ColorIndexMap::default();
        assert_eq!(m.color(5), Some([0, 0, 5]));
        assert_eq!(m.color(0x010203), Some([1, 2, 3]));
    }

    #[test]
    fn composite_identity_and_opaque() {
        let bg = TileImage::filled(4, 4, [10, 200, 30, 255]);
        let clear = TileImage::transparent(4, 4);
        assert_eq!(composite(&bg, &clear).unwrap(), bg);
        let black = TileImage::filled(4, 4, [0, 0, 0, 255]);
        assert_eq!(composite(&bg, &black).unwrap(), black);
        assert!(composite(&bg, &TileImage::transparent(3, 4)).is_err());
    }

    #[test]
    fn half_alpha_matches_scalar_over() {
        let bg = TileImage::filled(1, 1, [200, 100, 50, 255]);
        let fg = TileImage::filled(1, 1, [0, 0, 0, 128]);
        let out = composite(&bg, &fg).unwrap();
        let a = 128.0 / 255.0;
        let expect = |d: f64| (d * (1.0 - a)).round() as u8;
        assert_eq!(out.get(0, 0), [expect(200.0), expect(100.0), expect(50.0), 255]);
    }

    #[test]
    fn noise_rejects_negative_sigma() {
        let img = TileImage::filled(2, 2, [128, 128, 128, 255]);
        assert!(add_wornout_noise(&img, &Mask::new(2, 2), -1.0, 0).is_err());
        assert!(add_wornout_noise(&img, &Mask::new(3, 2), 1.0, 0).is_err());
    }

    #[test]
    fn png_round_trip() {
        let mut img = TileImage::transparent(3, 2);
        img.put(1, 1, [1, 2, 3, 255]);
        let back = TileImage::decode_png(&img.encode_png().unwrap()).unwrap();
        assert_eq!(back.pixels, img.pixels);
    }
}
