//! Label placement: candidate generation per geometry kind and greedy
//! collision resolution.
//!
//! Glyph poses are anchored at the center of the glyph box (advance wide,
//! `px_size` tall). Point and area labels are horizontal; line labels follow
//! the path with each glyph rotated to the chord spanning its advance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::font::{is_renderable, tofu_advance, GlyphProvider};
use crate::geodata::{project_to_pixel, FontSpec, GeoError, GeoFeature, Geometry, TileAddress};
use crate::geom::{convex_interiors_overlap, intersection_area, BBox, Point, Polygon};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlyphPose {
    pub ch: char,
    /// Center of the glyph box.
    pub anchor: Point,
    /// Baseline direction, in (−π, π], measured clockwise on screen.
    pub rotation: f64,
    pub advance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedLabel {
    pub feature_id: u64,
    pub text: String,
    pub font: FontSpec,
    pub px_size: f64,
    pub poses: Vec<GlyphPose>,
    pub priority: u8,
    /// 0 until the label is accepted by [`resolve_collisions`].
    pub color_index: u32,
    /// Convex pieces whose union covers every glyph box.
    pub footprint: Vec<Polygon>,
    /// Area label whose text box is not contained in its polygon.
    pub overflow: bool,
}

impl PlacedLabel {
    pub fn footprint_bbox(&self) -> Option<BBox> {
        let pts: Vec<Point> = self.footprint.iter().flat_map(|p| p.vertices.iter().copied()).collect();
        BBox::of(&pts)
    }

    /// Whether all glyph rotations are exactly zero.
    pub fn is_horizontal(&self) -> bool {
        self.poses.iter().all(|p| p.rotation == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementConfig {
    /// Pixels per typographic point.
    pub px_per_pt: f64,
    /// Multiplier on glyph advance when stepping along a line.
    pub letter_spacing: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            px_per_pt: 0.5,
            letter_spacing: 1.0,
        }
    }
}

/// Scene canvas in pixels; the continuous extent is `[0, width] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

impl Extent {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    fn polygon(&self) -> Polygon {
        Polygon::rect(0.0, 0.0, self.width, self.height)
    }
}

/// Feature geometry in scene pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum PixelGeometry {
    Point(Point),
    Lines(Vec<Vec<Point>>),
    /// Rings without the closing duplicate vertex.
    Areas(Vec<Polygon>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedFeature {
    pub id: u64,
    pub name: String,
    pub fclass: String,
    pub geometry: PixelGeometry,
}

/// Projects a feature into the pixel frame whose origin is the top-left
/// corner of `origin`.
pub fn project_feature(feature: &GeoFeature, origin: &TileAddress) -> Result<ProjectedFeature, GeoError> {
    let proj = |ll| project_to_pixel(ll, origin);
    let parts = |ps: &Vec<Vec<_>>| -> Result<Vec<Vec<Point>>, GeoError> {
        ps.iter().map(|p| p.iter().map(|&ll| proj(ll)).collect()).collect()
    };
    let geometry = match &feature.geometry {
        Geometry::Point(ll) => PixelGeometry::Point(proj(*ll)?),
        Geometry::PolylineSet(ps) => PixelGeometry::Lines(parts(ps)?),
        Geometry::PolygonSet(ps) => {
            PixelGeometry::Areas(parts(ps)?.into_iter().map(Polygon::new).collect())
        }
    };
    Ok(ProjectedFeature {
        id: feature.id,
        name: feature.name.clone(),
        fclass: feature.fclass.clone(),
        geometry,
    })
}

/// Rotated rectangle of size `w × h` centered at `c`, clockwise on screen.
fn oriented_box(c: Point, w: f64, h: f64, angle: f64) -> Polygon {
    let (s, co) = angle.sin_cos();
    let d = Point::new(co, s);
    let n = Point::new(-s, co);
    let corner = |a: f64, b: f64| c.add(d.scale(a * w / 2.0)).add(n.scale(b * h / 2.0));
    Polygon::new(vec![corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)])
}

fn normalize_angle(a: f64) -> f64 {
    if a <= -std::f64::consts::PI {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

/// Polyline with cumulative arclength.
struct Path {
    pts: Vec<Point>,
    cum: Vec<f64>,
}

impl Path {
    fn new(pts: Vec<Point>) -> Self {
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                acc += pts[i - 1].dist(*p);
            }
            cum.push(acc);
        }
        Self { pts, cum }
    }

    fn len(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    fn at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.len());
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => return self.pts[i],
            Err(i) => i.clamp(1, self.pts.len() - 1),
        };
        let seg = self.cum[i] - self.cum[i - 1];
        if seg == 0.0 {
            return self.pts[i];
        }
        self.pts[i - 1].lerp(self.pts[i], (s - self.cum[i - 1]) / seg)
    }
}

/// Liang–Barsky clip of segment `ab` to the extent.
fn clip_segment(a: Point, b: Point, e: &Extent) -> Option<(Point, Point)> {
    let d = b.sub(a);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d.x, a.x),
        (d.x, e.width - a.x),
        (-d.y, a.y),
        (d.y, e.height - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then(|| (a.add(d.scale(t0)), a.add(d.scale(t1))))
}

/// Maximal connected runs of the polyline inside the extent.
fn visible_runs(part: &[Point], e: &Extent) -> Vec<Vec<Point>> {
    let mut runs = Vec::new();
    let mut cur: Vec<Point> = Vec::new();
    for w in part.windows(2) {
        match clip_segment(w[0], w[1], e) {
            None => {
                if cur.len() >= 2 {
                    runs.push(std::mem::take(&mut cur));
                }
                cur.clear();
            }
            Some((a, b)) => {
                let joined = cur.last().is_some_and(|l| l.dist(a) < 1e-9);
                if !joined {
                    if cur.len() >= 2 {
                        runs.push(std::mem::take(&mut cur));
                    }
                    cur = vec![a];
                }
                if cur.last().is_some_and(|l| l.dist(b) > 0.0) {
                    cur.push(b);
                }
                if b.dist(w[1]) > 1e-9 {
                    if cur.len() >= 2 {
                        runs.push(std::mem::take(&mut cur));
                    }
                    cur.clear();
                }
            }
        }
    }
    if cur.len() >= 2 {
        runs.push(cur);
    }
    runs
}

/// Generates placement candidates for projected features.
pub struct Placer<'a> {
    pub provider: &'a dyn GlyphProvider,
    pub config: PlacementConfig,
    pub canvas: Extent,
}

impl<'a> Placer<'a> {
    pub fn new(provider: &'a dyn GlyphProvider, config: PlacementConfig, canvas: Extent) -> Self {
        Self {
            provider,
            config,
            canvas,
        }
    }

    pub fn px_size(&self, font: &FontSpec) -> f64 {
        font.size_pt as f64 * self.config.px_per_pt
    }

    /// Renderable characters with their advances.
    fn glyphs(&self, text: &str, font: &FontSpec) -> Vec<(char, f64)> {
        let px = self.px_size(font);
        text.chars()
            .filter(|&c| is_renderable(c))
            .map(|c| {
                let adv = self
                    .provider
                    .advance(font.font_id, c, px)
                    .unwrap_or_else(|| tofu_advance(px));
                (c, adv)
            })
            .collect()
    }

    fn label(&self, f: &ProjectedFeature, font: &FontSpec, poses: Vec<GlyphPose>, footprint: Vec<Polygon>) -> PlacedLabel {
        PlacedLabel {
            feature_id: f.id,
            text: f.name.clone(),
            font: *font,
            px_size: self.px_size(font),
            poses,
            priority: font.group.priority(),
            color_index: 0,
            footprint,
            overflow: false,
        }
    }

    /// Horizontal label whose text box is centered at `c`.
    fn horizontal(&self, f: &ProjectedFeature, font: &FontSpec, glyphs: &[(char, f64)], c: Point) -> Option<PlacedLabel> {
        let px = self.px_size(font);
        let width: f64 = glyphs.iter().map(|g| g.1).sum();
        if width <= 0.0 {
            return None;
        }
        let x0 = c.x - width / 2.0;
        let bbox = Polygon::rect(x0, c.y - px / 2.0, x0 + width, c.y + px / 2.0);
        if !bbox.vertices.iter().all(|&v| self.canvas.contains(v)) {
            return None;
        }
        let mut x = x0;
        let poses = glyphs
            .iter()
            .map(|&(ch, advance)| {
                let pose = GlyphPose {
                    ch,
                    anchor: Point::new(x + advance / 2.0, c.y),
                    rotation: 0.0,
                    advance,
                };
                x += advance;
                pose
            })
            .collect();
        Some(self.label(f, font, poses, vec![bbox]))
    }

    /// Horizontal candidates at eight compass offsets around the point,
    /// right of the point first.
    pub fn place_point_label(&self, f: &ProjectedFeature, font: &FontSpec) -> Vec<PlacedLabel> {
        let PixelGeometry::Point(p) = f.geometry else {
            return Vec::new();
        };
        let glyphs = self.glyphs(&f.name, font);
        let px = self.px_size(font);
        let width: f64 = glyphs.iter().map(|g| g.1).sum();
        if glyphs.is_empty() || width > self.canvas.width || px > self.canvas.height {
            return Vec::new();
        }
        let gap = (0.2 * px).max(2.0);
        let dg = gap * std::f64::consts::FRAC_1_SQRT_2;
        let (hw, hh) = (width / 2.0, px / 2.0);
        let offsets = [
            (hw + gap, 0.0),
            (hw + dg, -(hh + dg)),
            (hw + dg, hh + dg),
            (0.0, -(hh + gap)),
            (0.0, hh + gap),
            (-(hw + gap), 0.0),
            (-(hw + dg), -(hh + dg)),
            (-(hw + dg), hh + dg),
        ];
        offsets
            .iter()
            .filter_map(|&(dx, dy)| self.horizontal(f, font, &glyphs, Point::new(p.x + dx, p.y + dy)))
            .collect()
    }

    /// Text on the path, centered at the arclength midpoint of the longest
    /// visible run, with shifted fallbacks along that run and on other runs
    /// long enough to hold the text.
    pub fn place_line_label(&self, f: &ProjectedFeature, font: &FontSpec) -> Vec<PlacedLabel> {
        let PixelGeometry::Lines(parts) = &f.geometry else {
            return Vec::new();
        };
        let glyphs = self.glyphs(&f.name, font);
        if glyphs.is_empty() {
            return Vec::new();
        }
        let ls = self.config.letter_spacing;
        let total: f64 = glyphs.iter().map(|g| g.1 * ls).sum();
        let mut runs: Vec<Path> = parts
            .iter()
            .flat_map(|p| visible_runs(p, &self.canvas))
            .map(|mut pts| {
                let d = pts[pts.len() - 1].sub(pts[0]);
                if d.x < 0.0 {
                    pts.reverse();
                }
                Path::new(pts)
            })
            .filter(|p| p.len() >= total)
            .collect();
        runs.sort_by(|a, b| b.len().total_cmp(&a.len()));
        let mut out = Vec::new();
        for path in runs.iter().take(3) {
            let slack = path.len() - total;
            for shift in [0.0, -0.25, 0.25, -0.5, 0.5] {
                let start = slack / 2.0 + shift * slack;
                if let Some(l) = self.on_path(f, font, &glyphs, path, start) {
                    out.push(l);
                }
            }
        }
        out
    }

    fn on_path(&self, f: &ProjectedFeature, font: &FontSpec, glyphs: &[(char, f64)], path: &Path, start: f64) -> Option<PlacedLabel> {
        let px = self.px_size(font);
        let ls = self.config.letter_spacing;
        let mut s = start;
        let mut poses = Vec::with_capacity(glyphs.len());
        let mut footprint = Vec::with_capacity(glyphs.len());
        for &(ch, advance) in glyphs {
            let step = advance * ls;
            let mid = s + step / 2.0;
            let a = path.at(mid - advance / 2.0);
            let b = path.at(mid + advance / 2.0);
            let rotation = normalize_angle((b.y - a.y).atan2(b.x - a.x));
            let anchor = path.at(mid);
            let piece = oriented_box(anchor, advance, px, rotation);
            if !piece.vertices.iter().all(|&v| self.canvas.contains(v)) {
                return None;
            }
            poses.push(GlyphPose {
                ch,
                anchor,
                rotation,
                advance,
            });
            footprint.push(piece);
            s += step;
        }
        if poses.iter().all(|p| p.rotation == 0.0) && (ls - 1.0).abs() < 1e-12 {
            let pts: Vec<Point> = footprint.iter().flat_map(|p| p.vertices.clone()).collect();
            let bb = BBox::of(&pts)?;
            footprint = vec![Polygon::rect(bb.min.x, bb.min.y, bb.max.x, bb.max.y)];
        }
        Some(self.label(f, font, poses, footprint))
    }

    /// Horizontal candidates centered at the pole of inaccessibility of the
    /// largest visible ring, then shifted up and down.
    pub fn place_area_label(&self, f: &ProjectedFeature, font: &FontSpec) -> Vec<PlacedLabel> {
        let PixelGeometry::Areas(rings) = &f.geometry else {
            return Vec::new();
        };
        let canvas = self.canvas.polygon();
        let Some(ring) = rings
            .iter()
            .map(|r| visible_ring(r, &canvas))
            .filter(|r| r.area() > 1e-9)
            .max_by(|a, b| a.area().total_cmp(&b.area()))
        else {
            return Vec::new();
        };
        let glyphs = self.glyphs(&f.name, font);
        if glyphs.is_empty() {
            return Vec::new();
        }
        let px = self.px_size(font);
        let c = polylabel(&ring, 0.5);
        [0.0, -0.75, 0.75, -1.5, 1.5]
            .iter()
            .filter_map(|&k| self.horizontal(f, font, &glyphs, Point::new(c.x, c.y + k * px)))
            .map(|mut l| {
                let bx = &l.footprint[0];
                l.overflow = intersection_area(bx, &ring) < bx.area() - 1e-6;
                l
            })
            .collect()
    }

    /// Candidates for any geometry kind.
    pub fn candidates(&self, f: &ProjectedFeature, font: &FontSpec) -> Vec<PlacedLabel> {
        match f.geometry {
            PixelGeometry::Point(_) => self.place_point_label(f, font),
            PixelGeometry::Lines(_) => self.place_line_label(f, font),
            PixelGeometry::Areas(_) => self.place_area_label(f, font),
        }
    }
}

/// The ring clipped to the canvas when it sticks out.
fn visible_ring(ring: &Polygon, canvas: &Polygon) -> Polygon {
    let Some(bb) = ring.bbox() else {
        return ring.clone();
    };
    let cb = canvas.bbox().expect("canvas");
    if cb.contains_box(&bb) {
        return ring.clone();
    }
    let clipped = crate::geom::clip_convex(&ring.clone().clockwise().vertices, &canvas.vertices);
    Polygon::new(clipped)
}

/// Signed distance to the ring boundary, positive inside.
fn signed_distance(ring: &Polygon, p: Point) -> f64 {
    let d = ring.boundary_distance(p);
    if ring.contains_strict(p) {
        d
    } else {
        -d
    }
}

struct Cell {
    c: Point,
    h: f64,
    d: f64,
    max: f64,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.max == o.max
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.max.total_cmp(&o.max)
    }
}

impl Cell {
    fn new(c: Point, h: f64, ring: &Polygon) -> Self {
        let d = signed_distance(ring, c);
        Self {
            c,
            h,
            d,
            max: d + h * std::f64::consts::SQRT_2,
        }
    }
}

/// Interior point farthest from the ring boundary (pole of inaccessibility),
/// found by quadtree search to within `precision` pixels.
pub fn polylabel(ring: &Polygon, precision: f64) -> Point {
    let Some(bb) = ring.bbox() else {
        return Point::new(0.0, 0.0);
    };
    let size = bb.width().min(bb.height());
    if size <= 0.0 {
        return bb.min;
    }
    let h = size / 2.0;
    let mut heap = BinaryHeap::new();
    let mut x = bb.min.x;
    while x < bb.max.x {
        let mut y = bb.min.y;
        while y < bb.max.y {
            heap.push(Cell::new(Point::new(x + h, y + h), h, ring));
            y += size;
        }
        x += size;
    }
    let mut best = match ring.centroid() {
        Some(c) => Cell::new(c, 0.0, ring),
        None => Cell::new(bb.min, 0.0, ring),
    };
    let bc = Cell::new(Point::new((bb.min.x + bb.max.x) / 2.0, (bb.min.y + bb.max.y) / 2.0), 0.0, ring);
    if bc.d > best.d {
        best = bc;
    }
    while let Some(cell) = heap.pop() {
        if cell.d > best.d {
            best = Cell::new(cell.c, 0.0, ring);
        }
        if cell.max - best.d <= precision {
            continue;
        }
        let h = cell.h / 2.0;
        for (dx, dy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            heap.push(Cell::new(Point::new(cell.c.x + dx * h, cell.c.y + dy * h), h, ring));
        }
    }
    best.c
}

fn footprints_overlap(a: &PlacedLabel, abb: &BBox, b: &PlacedLabel, bbb: &BBox) -> bool {
    if !abb.overlaps(bbb) {
        return false;
    }
    a.footprint.iter().any(|pa| {
        b.footprint
            .iter()
            .any(|pb| convex_interiors_overlap(&pa.vertices, &pb.vertices, 1e-9))
    })
}

/// Greedy acceptance in (priority, feature id) order: each feature takes its
/// first candidate whose footprint interior is disjoint from everything
/// already accepted. Accepted labels get color indices 1, 2, … in acceptance
/// order.
pub fn resolve_collisions(candidates: Vec<Vec<PlacedLabel>>) -> Vec<PlacedLabel> {
    let mut lists: Vec<Vec<PlacedLabel>> = candidates.into_iter().filter(|c| !c.is_empty()).collect();
    lists.sort_by_key(|c| (c[0].priority, c[0].feature_id));
    let mut accepted: Vec<(PlacedLabel, BBox)> = Vec::new();
    for list in lists {
        for cand in list {
            let Some(bb) = cand.footprint_bbox() else {
                continue;
            };
            if accepted.iter().all(|(a, abb)| !footprints_overlap(&cand, &bb, a, abb)) {
                accepted.push((cand, bb));
                break;
            }
        }
    }
    accepted
        .into_iter()
        .enumerate()
        .map(|(i, (mut l, _))| {
            l.color_index = i as u32 + 1;
            l
        })
        .collect()
}
