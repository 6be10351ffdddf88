//! Planar geometry shared by placement, annotation and evaluation.
//!
//! All coordinates are image pixels with the y axis pointing down. A pixel
//! with index `(i, j)` has its center at the continuous coordinate `(i, j)`.
//! "Clockwise" always means clockwise as seen on screen, which under y-down
//! coordinates is a *positive* shoelace sum.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// z component of `(b - a) x (c - a)`.
pub fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of(points: &[Point]) -> Option<BBox> {
        let first = *points.first()?;
        let mut b = BBox {
            min: first,
            max: first,
        };
        for p in &points[1..] {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// True when the open interiors overlap.
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.min.x >= self.min.x
            && other.min.y >= self.min.y
            && other.max.x <= self.max.x
            && other.max.y <= self.max.y
    }
}

/// A polygon given by its vertex ring, without a repeated closing vertex.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut vertices = vertices;
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Self { vertices }
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Self {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace sum `Σ (x_i·y_{i+1} − x_{i+1}·y_i) / 2`. Positive for
    /// clockwise rings on screen.
    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_clockwise(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn ensure_clockwise(&mut self) {
        if self.signed_area() < 0.0 {
            self.vertices.reverse();
        }
    }

    pub fn clockwise(mut self) -> Self {
        self.ensure_clockwise();
        self
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn centroid(&self) -> Option<Point> {
        let a = self.signed_area();
        if a == 0.0 {
            return None;
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let f = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * f;
            cy += (p.y + q.y) * f;
        }
        Some(Point::new(cx / (6.0 * a), cy / (6.0 * a)))
    }

    /// Even-odd containment; points on the boundary count as inside.
    pub fn contains(&self, p: Point) -> bool {
        if self.on_boundary(p, 1e-9) {
            return true;
        }
        self.contains_strict(p)
    }

    /// Even-odd containment by ray casting, boundary points undefined.
    pub fn contains_strict(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn on_boundary(&self, p: Point, eps: f64) -> bool {
        self.edges().any(|(a, b)| point_segment_distance(p, a, b) <= eps)
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when two non-adjacent edges intersect or touch.
    pub fn is_self_intersecting(&self) -> bool {
        let n = self.vertices.len();
        if n < 4 {
            return false;
        }
        let v = &self.vertices;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in (i + 1)..n {
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }

    /// Drops consecutive duplicates and vertices lying on the segment between
    /// their neighbours.
    pub fn simplified(&self) -> Polygon {
        let mut v: Vec<Point> = Vec::with_capacity(self.vertices.len());
        for &p in &self.vertices {
            if v.last() != Some(&p) {
                v.push(p);
            }
        }
        while v.len() > 1 && v.first() == v.last() {
            v.pop();
        }
        let mut changed = true;
        while changed && v.len() > 3 {
            changed = false;
            let n = v.len();
            for i in 0..n {
                let prev = v[(i + n - 1) % n];
                let next = v[(i + 1) % n];
                if cross(prev, v[i], next).abs() <= 1e-12 * (1.0 + prev.dist(next).powi(2)) {
                    v.remove(i);
                    changed = true;
                    break;
                }
            }
        }
        Polygon { vertices: v }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
    p.dist(a.lerp(b, t.clamp(0.0, 1.0)))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Proper crossing: the open segments cross at a single interior point.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Sutherland–Hodgman clip of `subject` against a convex `clip` polygon.
/// Both rings may have either orientation.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let orient = {
        let p = Polygon {
            vertices: clip.to_vec(),
        };
        p.signed_area().signum()
    };
    if orient == 0.0 {
        return Vec::new();
    }
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let input = std::mem::take(&mut output);
        let inside = |p: Point| cross(a, b, p) * orient >= 0.0;
        let m = input.len();
        for k in 0..m {
            let cur = input[k];
            let prev = input[(k + m - 1) % m];
            let cin = inside(cur);
            let pin = inside(prev);
            if cin {
                if !pin {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if pin {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn line_intersection(p: Point, q: Point, a: Point, b: Point) -> Point {
    let r = q.sub(p);
    let s = b.sub(a);
    let denom = r.x * s.y - r.y * s.x;
    if denom == 0.0 {
        return q;
    }
    let t = ((a.x - p.x) * s.y - (a.y - p.y) * s.x) / denom;
    p.add(r.scale(t))
}

fn ring_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    (s * 0.5).abs()
}

/// Area of the intersection of two convex polygons.
pub fn convex_intersection_area(a: &[Point], b: &[Point]) -> f64 {
    ring_area(&clip_convex(a, b))
}

/// Exact intersection area of two simple polygons (any orientation, convex
/// or not).
///
/// Each ring is decomposed into a signed triangle fan rooted at its first
/// vertex; the fan's signed indicator sum equals the polygon's indicator
/// almost everywhere, so the pairwise convex overlaps sum to the overlap of
/// the polygons.
pub fn intersection_area(p: &Polygon, q: &Polygon) -> f64 {
    if p.len() < 3 || q.len() < 3 {
        return 0.0;
    }
    match (p.bbox(), q.bbox()) {
        (Some(a), Some(b)) if a.overlaps(&b) => {}
        _ => return 0.0,
    }
    let fan = |poly: &Polygon| -> Vec<([Point; 3], f64, BBox)> {
        let v = &poly.vertices;
        (1..v.len() - 1)
            .filter_map(|i| {
                let t = [v[0], v[i], v[i + 1]];
                let s = cross(t[0], t[1], t[2]);
                if s == 0.0 {
                    None
                } else {
                    Some((t, s.signum(), BBox::of(&t).unwrap()))
                }
            })
            .collect()
    };
    let fp = fan(p);
    let fq = fan(q);
    let mut total = 0.0;
    for (ta, sa, ba) in &fp {
        for (tb, sb, bb) in &fq {
            if !ba.overlaps(bb) {
                continue;
            }
            total += sa * sb * convex_intersection_area(ta, tb);
        }
    }
    let orient = p.signed_area().signum() * q.signed_area().signum();
    (total * orient).max(0.0)
}

/// Even-odd rasterized intersection area, sampling a regular grid of `step`
/// pixel spacing. Used for polygons the exact path rejects.
pub fn raster_intersection_area(p: &Polygon, q: &Polygon, step: f64) -> f64 {
    let (Some(a), Some(b)) = (p.bbox(), q.bbox()) else {
        return 0.0;
    };
    let x0 = a.min.x.max(b.min.x);
    let y0 = a.min.y.max(b.min.y);
    let x1 = a.max.x.min(b.max.x);
    let y1 = a.max.y.min(b.max.y);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let nx = ((x1 - x0) / step).ceil() as usize;
    let ny = ((y1 - y0) / step).ceil() as usize;
    let mut count = 0usize;
    for j in 0..ny {
        let y = y0 + (j as f64 + 0.5) * step;
        for i in 0..nx {
            let x = x0 + (i as f64 + 0.5) * step;
            let pt = Point::new(x, y);
            if p.contains_strict(pt) && q.contains_strict(pt) {
                count += 1;
            }
        }
    }
    count as f64 * step * step
}

/// Even-odd rasterized area of one polygon.
pub fn raster_area(p: &Polygon, step: f64) -> f64 {
    raster_intersection_area(p, p, step)
}

/// Separating-axis overlap test for convex polygons. Returns true only when
/// the interiors overlap by more than `eps` along every candidate axis.
pub fn convex_interiors_overlap(a: &[Point], b: &[Point], eps: f64) -> bool {
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let axis = Point::new(-(q.y - p.y), q.x - p.x);
            let len = axis.norm();
            if len == 0.0 {
                continue;
            }
            let axis = axis.scale(1.0 / len);
            let proj = |pts: &[Point]| {
                pts.iter()
                    .map(|v| v.x * axis.x + v.y * axis.y)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                        (lo.min(d), hi.max(d))
                    })
            };
            let (alo, ahi) = proj(a);
            let (blo, bhi) = proj(b);
            if ahi - blo <= eps || bhi - alo <= eps {
                return false;
            }
        }
    }
    true
}

/// Convex hull (Andrew's monotone chain), clockwise on screen, without
/// collinear vertices.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    // monotone chain with cross > 0 kept yields a positive shoelace ring
    let mut poly = Polygon { vertices: lower };
    poly.ensure_clockwise();
    poly.vertices
}
