//! Bounding polygons rebuilt from a centerline and a half-thickness.

use crate::geom::{Point, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub struct Ribbon {
    pub polygon: Polygon,
    pub self_intersecting: bool,
}

/// `n` points evenly spaced by arc length along the polyline, ends included.
pub fn resample(points: &[Point], n: usize) -> Vec<Point> {
    let n = n.max(2);
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut j = 1;
    for i in 0..n {
        let s = total * i as f64 / (n - 1) as f64;
        while j < points.len() - 1 && cum[j] < s {
            j += 1;
        }
        let seg = cum[j] - cum[j - 1];
        let t = if seg > 0.0 { ((s - cum[j - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        out.push(points[j - 1].lerp(points[j], t));
    }
    out
}

fn unit(v: Point) -> Point {
    let n = v.norm();
    if n == 0.0 {
        Point::new(1.0, 0.0)
    } else {
        v.scale(1.0 / n)
    }
}

/// Target number of samples: one per `h` of length, between 10 and 20, but
/// never more than the centerline has.
pub fn sample_count(points: &[Point], h: f64) -> usize {
    let len: f64 = points.windows(2).map(|w| w[0].dist(w[1])).sum();
    let want = ((len / h.max(1e-9)).ceil() as usize).clamp(10, 20);
    want.min(points.len()).max(2)
}

/// Ribbon of half-width `h` around the centerline: perpendicular offsets at
/// the midpoints of consecutive samples plus both ends pushed out by `h`,
/// joined side by side into a clockwise polygon.
pub fn reconstruct_polygon(centerline: &[Point], h: f64) -> Option<Ribbon> {
    if centerline.len() < 2 || !(h > 0.0) {
        return None;
    }
    let pts = resample(centerline, sample_count(centerline, h));
    let n = pts.len();
    let d0 = unit(pts[1].sub(pts[0]));
    let d1 = unit(pts[n - 1].sub(pts[n - 2]));
    let mut axis = vec![(pts[0].sub(d0.scale(h)), d0)];
    for w in pts.windows(2) {
        axis.push((w[0].lerp(w[1], 0.5), unit(w[1].sub(w[0]))));
    }
    axis.push((pts[n - 1].add(d1.scale(h)), d1));
    let normal = |d: Point| Point::new(-d.y, d.x);
    let mut ring: Vec<Point> = axis.iter().map(|&(c, d)| c.add(normal(d).scale(h))).collect();
    ring.extend(axis.iter().rev().map(|&(c, d)| c.sub(normal(d).scale(h))));
    let polygon = Polygon::new(ring).simplified().clockwise();
    let self_intersecting = polygon.is_self_intersecting();
    Some(Ribbon {
        polygon,
        self_intersecting,
    })
}
