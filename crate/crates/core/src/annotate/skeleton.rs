//! Voronoi skeletons of polygons.

use delaunator::{triangulate, EMPTY};

use crate::geom::{segments_cross, Point, Polygon};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCenterline {
    pub edges: Vec<(Point, Point)>,
    /// The polygon had no interior clearance of at least one pixel.
    pub thin: bool,
}

impl RawCenterline {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Distinct edge endpoints in first-seen order.
    pub fn points(&self) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &self.edges {
            for p in [a, b] {
                if seen.insert((p.x.to_bits(), p.y.to_bits())) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Samples every `step` along the closed boundary, starting at vertex 0.
pub fn densify_ring(polygon: &Polygon, step: f64) -> Vec<Point> {
    let mut out = Vec::new();
    let mut offset = 0.0;
    for (a, b) in polygon.edges() {
        let len = a.dist(b);
        let mut s = offset;
        while s < len {
            out.push(a.lerp(b, s / len));
            s += step;
        }
        offset = s - len;
    }
    out
}

fn circumcenter(a: Point, b: Point, c: Point) -> Option<Point> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d == 0.0 {
        return None;
    }
    let sq = |p: Point| p.x * p.x + p.y * p.y;
    Some(Point::new(
        (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d,
        (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d,
    ))
}

/// Voronoi diagram of the boundary sampled every `interpolation_distance`
/// pixels, restricted to edges lying entirely inside the polygon.
pub fn compute_raw_centerline(polygon: &Polygon, interpolation_distance: f64) -> RawCenterline {
    let step = interpolation_distance.max(1e-3);
    let mut samples = densify_ring(polygon, step);
    samples.dedup();
    if samples.len() < 3 {
        return RawCenterline {
            edges: Vec::new(),
            thin: true,
        };
    }
    let pts: Vec<delaunator::Point> = samples.iter().map(|p| delaunator::Point { x: p.x, y: p.y }).collect();
    let tri = triangulate(&pts);
    let centers: Vec<Option<Point>> = tri
        .triangles
        .chunks_exact(3)
        .map(|t| circumcenter(samples[t[0]], samples[t[1]], samples[t[2]]))
        .collect();
    let inside: Vec<bool> = centers
        .iter()
        .map(|c| c.is_some_and(|c| polygon.contains(c)))
        .collect();

    let mut edges = Vec::new();
    let mut clearance = 0.0f64;
    for e in 0..tri.halfedges.len() {
        let o = tri.halfedges[e];
        if o == EMPTY || o < e {
            continue;
        }
        let (ta, tb) = (e / 3, o / 3);
        if !inside[ta] || !inside[tb] {
            continue;
        }
        let (a, b) = (centers[ta].unwrap(), centers[tb].unwrap());
        if a == b {
            continue;
        }
        if polygon.edges().any(|(p, q)| segments_cross(a, b, p, q)) {
            continue;
        }
        if !polygon.contains(a.lerp(b, 0.5)) {
            continue;
        }
        clearance = clearance
            .max(polygon.boundary_distance(a))
            .max(polygon.boundary_distance(b));
        edges.push((a, b));
    }
    if edges.is_empty() || clearance < 1.0 {
        return RawCenterline {
            edges: Vec::new(),
            thin: true,
        };
    }
    RawCenterline { edges, thin: false }
}
