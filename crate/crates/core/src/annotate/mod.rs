//! Ground truth derived from the colored text layer.
//!
//! Each label's pixels are recovered by exact color match, wrapped in an
//! alpha-shape polygon, skeletonized, smoothed into a centerline and measured
//! for local height.

mod fit;
mod height;
mod hull;
mod ribbon;
mod skeleton;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use fit::{fit_centerline, polyfit, Axis, Centerline, FitResult, Poly};
pub use height::{local_height, squared_edt};
pub use hull::{concave_hull, HullResult};
pub use ribbon::{reconstruct_polygon, resample, Ribbon};
pub use skeleton::{compute_raw_centerline, densify_ring, RawCenterline};

use crate::geom::{Point, Polygon};
use crate::raster::{ColorIndexMap, TileImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotateConfig {
    pub alpha: f64,
    pub interpolation_distance: f64,
    /// Arc-length spacing of centerline samples.
    pub sample_step: f64,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self {
            alpha: 0.02,
            interpolation_distance: 9.0,
            sample_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFlags {
    pub multi_component: bool,
    pub self_intersecting: bool,
    pub overflow: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate_hull: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub thin: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reduced_degree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub label_id: u32,
    pub transcription: String,
    /// Clockwise alpha-shape boundary.
    pub polygon: Polygon,
    pub centerline: Centerline,
    /// Half-thickness of the text in pixels.
    pub local_height: f64,
    pub flags: AnnotationFlags,
}

impl AnnotationRecord {
    /// Ribbon polygon rebuilt from the centerline and local height.
    pub fn reconstructed(&self) -> Option<Ribbon> {
        reconstruct_polygon(&self.centerline.points, self.local_height)
    }
}

/// Pixels whose RGB equals the label's color and whose alpha is 255, in
/// row-major order.
pub fn extract_label_pixels(colored: &TileImage, colors: &ColorIndexMap, index: u32) -> Vec<(u32, u32)> {
    let Some(rgb) = colors.color(index) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for y in 0..colored.height {
        for x in 0..colored.width {
            let p = colored.get(x, y);
            if p[3] == 255 && p[..3] == rgb {
                out.push((x, y));
            }
        }
    }
    out
}

/// All labels' pixel sets in one scan, keyed by color index.
pub fn extract_all(colored: &TileImage, colors: &ColorIndexMap) -> BTreeMap<u32, Vec<(u32, u32)>> {
    let mut out: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for y in 0..colored.height {
        for x in 0..colored.width {
            let p = colored.get(x, y);
            if p[3] != 255 {
                continue;
            }
            if let Some(i) = colors.index_of([p[0], p[1], p[2]]) {
                out.entry(i).or_default().push((x, y));
            }
        }
    }
    out
}

/// Pixels of a `width × height` image whose centers lie in the polygon.
pub fn polygon_pixels(polygon: &Polygon, width: u32, height: u32) -> Vec<(u32, u32)> {
    let Some(bb) = polygon.bbox() else {
        return Vec::new();
    };
    let x0 = bb.min.x.ceil().max(0.0) as u32;
    let y0 = bb.min.y.ceil().max(0.0) as u32;
    let x1 = (bb.max.x.floor() as i64).min(width as i64 - 1);
    let y1 = (bb.max.y.floor() as i64).min(height as i64 - 1);
    let mut out = Vec::new();
    if x1 < 0 || y1 < 0 {
        return out;
    }
    for y in y0..=y1 as u32 {
        for x in x0..=x1 as u32 {
            if polygon.contains(Point::new(x as f64, y as f64)) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Full annotation of one label's pixel set within a `width × height` scene.
pub fn annotate_label(
    label_id: u32,
    transcription: &str,
    pixels: &[(u32, u32)],
    width: u32,
    height: u32,
    config: &AnnotateConfig,
) -> Option<AnnotationRecord> {
    if pixels.is_empty() {
        return None;
    }
    let hull = concave_hull(pixels, config.alpha);
    let polygon = hull.polygon;
    let mut flags = AnnotationFlags {
        multi_component: hull.multi_component,
        degenerate_hull: hull.degenerate,
        self_intersecting: polygon.is_self_intersecting(),
        ..Default::default()
    };

    let raw = compute_raw_centerline(&polygon, config.interpolation_distance);
    flags.thin = raw.thin;
    let fit_points = if raw.is_empty() { polygon.vertices.clone() } else { raw.points() };
    let centerline = match fit_centerline(&fit_points, Some(&polygon), config.sample_step) {
        Some(f) => {
            flags.reduced_degree = f.reduced_degree;
            f.centerline
        }
        None => extreme_vertices(&polygon)?,
    };

    let mut region = polygon_pixels(&polygon, width, height);
    region.extend_from_slice(pixels);
    region.sort_unstable();
    region.dedup();
    let h = local_height(&region, width, height).unwrap_or_else(|| {
        let c = crate::placement::polylabel(&polygon, 0.5);
        polygon.boundary_distance(c).max(1.0)
    });

    if let Some(r) = reconstruct_polygon(&centerline.points, h) {
        flags.self_intersecting |= r.self_intersecting;
    }
    Some(AnnotationRecord {
        label_id,
        transcription: transcription.to_string(),
        polygon,
        centerline,
        local_height: h,
        flags,
    })
}

/// Two-point centerline between the polygon's extreme vertices along its
/// longer extent.
fn extreme_vertices(polygon: &Polygon) -> Option<Centerline> {
    let bb = polygon.bbox()?;
    let axis = if bb.width() >= bb.height() { Axis::X } else { Axis::Y };
    let key = |p: &Point| match axis {
        Axis::X => p.x,
        Axis::Y => p.y,
    };
    let lo = *polygon.vertices.iter().min_by(|a, b| key(a).total_cmp(&key(b)))?;
    let hi = *polygon.vertices.iter().max_by(|a, b| key(a).total_cmp(&key(b)))?;
    (key(&hi) > key(&lo)).then(|| Centerline {
        points: vec![lo, hi],
        axis,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerAnnotations {
    pub records: Vec<AnnotationRecord>,
    /// Expected labels with no pixels in the layer.
    pub absent: Vec<u32>,
}

/// Annotates every label listed in `transcriptions` (color index → text).
pub fn annotate_layer(
    colored: &TileImage,
    colors: &ColorIndexMap,
    transcriptions: &BTreeMap<u32, String>,
    config: &AnnotateConfig,
) -> LayerAnnotations {
    let pixels = extract_all(colored, colors);
    let mut out = LayerAnnotations::default();
    for (&id, text) in transcriptions {
        let rec = pixels
            .get(&id)
            .and_then(|px| annotate_label(id, text, px, colored.width, colored.height, config));
        match rec {
            Some(r) => out.records.push(r),
            None => out.absent.push(id),
        }
    }
    out
}

fn draw_line(img: &mut TileImage, a: Point, b: Point, rgb: [u8; 3]) {
    let steps = (a.dist(b).ceil() as usize).max(1) * 2;
    for i in 0..=steps {
        let p = a.lerp(b, i as f64 / steps as f64);
        let (x, y) = (p.x.round(), p.y.round());
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width && (y as u32) < img.height {
            img.put(x as u32, y as u32, [rgb[0], rgb[1], rgb[2], 255]);
        }
    }
}

/// Debug view: polygons in blue and centerlines in red over `base`.
pub fn render_overlay(base: &TileImage, records: &[AnnotationRecord]) -> TileImage {
    let mut img = base.clone();
    for r in records {
        for (a, b) in r.polygon.edges() {
            draw_line(&mut img, a, b, [0, 0, 255]);
        }
        for w in r.centerline.points.windows(2) {
            draw_line(&mut img, w[0], w[1], [255, 0, 0]);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::font::BuiltinFont;
    use crate::geodata::{FontGroup, FontSpec};
    use crate::geom::intersection_area;
    use crate::placement::{Extent, PixelGeometry, PlacementConfig, Placer, ProjectedFeature};
    use crate::raster::render_colored_layer;

    fn render_word(text: &str, at: Point) -> (TileImage, crate::placement::PlacedLabel) {
        let bf = BuiltinFont;
        let placer = Placer::new(&bf, PlacementConfig::default(), Extent::new(256.0, 256.0));
        let f = ProjectedFeature {
            id: 1,
            name: text.into(),
            fclass: "x".into(),
            geometry: PixelGeometry::Lines(vec![vec![Point::new(at.x - 100.0, at.y), Point::new(at.x + 100.0, at.y)]]),
        };
        let font = FontSpec {
            group: FontGroup::Medium,
            size_pt: 40,
            font_id: 5,
        };
        let mut l = placer.place_line_label(&f, &font).remove(0);
        l.color_index = 3;
        let (img, _) = render_colored_layer(std::slice::from_ref(&l), 256, 256, &bf, &ColorIndexMap::default()).unwrap();
        (img, l)
    }

    #[test]
    fn block_extraction_counts_pixels() {
        let colors = ColorIndexMap::default();
        let mut img = TileImage::transparent(8, 8);
        let c = colors.color(4).unwrap();
        for y in 2..5 {
            for x in 3..6 {
                img.put(x, y, [c[0], c[1], c[2], 255]);
            }
        }
        img.put(0, 0, [0, 0, 9, 255]);
        assert_eq!(extract_label_pixels(&img, &colors, 4).len(), 9);
        let all = extract_all(&img, &colors);
        assert_eq!(all.len(), 2);
        assert_eq!(all[&9], vec![(0, 0)]);
    }

    #[test]
    fn glyph_i_extraction_equals_glyph_raster() {
        let (img, l) = render_word("I", Point::new(128.0, 128.0));
        let px = extract_label_pixels(&img, &ColorIndexMap::default(), 3);
        let bf = BuiltinFont;
        use crate::font::GlyphProvider;
        let pose = l.poses[0];
        let mut expect = Vec::new();
        for y in 0..256u32 {
            for x in 0..256u32 {
                let u = (x as f64 - pose.anchor.x) + pose.advance / 2.0;
                let v = (y as f64 - pose.anchor.y) + l.px_size / 2.0;
                if bf.covers(l.font.font_id, 'I', l.px_size, u, v) {
                    expect.push((x, y));
                }
            }
        }
        assert!(!expect.is_empty());
        assert_eq!(px, expect);
    }

    #[test]
    fn straight_word_round_trip() {
        let (img, _) = render_word("Riverside", Point::new(128.0, 128.0));
        let mut tr = BTreeMap::new();
        tr.insert(3, "Riverside".to_string());
        tr.insert(8, "Missing".to_string());
        let out = annotate_layer(&img, &ColorIndexMap::default(), &tr, &AnnotateConfig::default());
        assert_eq!(out.absent, vec![8]);
        let r = &out.records[0];
        assert!(r.polygon.is_clockwise() && !r.polygon.is_self_intersecting());
        assert_eq!(r.centerline.axis, Axis::X);
        assert!(r.centerline.is_monotone());
        assert!(r.centerline.points.iter().all(|p| r.polygon.contains(*p)));
        for (x, y) in extract_label_pixels(&img, &ColorIndexMap::default(), 3) {
            let p = Point::new(x as f64, y as f64);
            assert!(r.polygon.contains(p) || r.polygon.boundary_distance(p) <= 1.0);
        }
        let rib = r.reconstructed().unwrap().polygon;
        let inter = intersection_area(&rib, &r.polygon);
        let iou = inter / (rib.area() + r.polygon.area() - inter);
        assert!(iou >= 0.7, "iou {iou}");
    }

    #[test]
    fn overlay_marks_polygon_blue() {
        let (img, _) = render_word("Ab", Point::new(128.0, 128.0));
        let mut tr = BTreeMap::new();
        tr.insert(3, "Ab".to_string());
        let out = annotate_layer(&img, &ColorIndexMap::default(), &tr, &AnnotateConfig::default());
        let ov = render_overlay(&TileImage::transparent(256, 256), &out.records);
        let v = out.records[0].polygon.vertices[0];
        assert_eq!(ov.get(v.x.round() as u32, v.y.round() as u32), [0, 0, 255, 255]);
    }
}
