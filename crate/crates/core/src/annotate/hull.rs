//! Alpha-shape bounding polygons of pixel sets.

use std::collections::HashMap;

use delaunator::{next_halfedge, triangulate, EMPTY};

use crate::geom::{cross, Point, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub struct HullResult {
    pub polygon: Polygon,
    /// The kept triangles formed more than one connected piece.
    pub multi_component: bool,
    /// Input was too degenerate for a triangulation; the polygon is a
    /// dilated oriented rectangle.
    pub degenerate: bool,
}

pub(crate) fn circumradius(a: Point, b: Point, c: Point) -> f64 {
    let area2 = cross(a, b, c).abs();
    if area2 == 0.0 {
        return f64::INFINITY;
    }
    a.dist(b) * b.dist(c) * c.dist(a) / (2.0 * area2)
}

/// Delaunay triangles kept by the alpha filter, as positively oriented index
/// triples. `alpha <= 0` keeps every non-degenerate triangle.
#[cfg(test)]
pub(crate) fn alpha_triangles(points: &[Point], alpha: f64) -> Vec<[usize; 3]> {
    let tri = delaunay(points);
    kept(points, &tri.triangles, alpha)
        .into_iter()
        .enumerate()
        .filter(|(_, k)| *k)
        .map(|(t, _)| oriented(points, [tri.triangles[3 * t], tri.triangles[3 * t + 1], tri.triangles[3 * t + 2]]))
        .collect()
}

fn delaunay(points: &[Point]) -> delaunator::Triangulation {
    let pts: Vec<delaunator::Point> = points
        .iter()
        .map(|p| delaunator::Point { x: p.x, y: p.y })
        .collect();
    triangulate(&pts)
}

fn kept(points: &[Point], triangles: &[usize], alpha: f64) -> Vec<bool> {
    let limit = if alpha > 0.0 { 1.0 / alpha } else { f64::INFINITY };
    triangles
        .chunks_exact(3)
        .map(|t| {
            let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
            cross(a, b, c) != 0.0 && circumradius(a, b, c) < limit
        })
        .collect()
}

#[cfg(test)]
fn oriented(points: &[Point], t: [usize; 3]) -> [usize; 3] {
    if cross(points[t[0]], points[t[1]], points[t[2]]) > 0.0 {
        t
    } else {
        [t[0], t[2], t[1]]
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Alpha shape of pixel centers: Delaunay triangles with circumradius below
/// `1/alpha`, reduced to the outer boundary of the largest connected piece,
/// clockwise on screen and without collinear vertices.
pub fn concave_hull(pixels: &[(u32, u32)], alpha: f64) -> HullResult {
    let mut points: Vec<Point> = pixels.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    points.dedup();
    if points.len() < 3 {
        return fallback(&points);
    }
    let tri = delaunay(&points);
    let keep = kept(&points, &tri.triangles, alpha);
    let nt = keep.len();
    if !keep.iter().any(|&k| k) {
        return fallback(&points);
    }

    let mut parent: Vec<usize> = (0..nt).collect();
    for e in 0..tri.halfedges.len() {
        let o = tri.halfedges[e];
        if o != EMPTY && keep[e / 3] && keep[o / 3] {
            let (a, b) = (find(&mut parent, e / 3), find(&mut parent, o / 3));
            parent[a] = b;
        }
    }
    let mut area: HashMap<usize, f64> = HashMap::new();
    for t in (0..nt).filter(|&t| keep[t]) {
        let r = find(&mut parent, t);
        let s = &tri.triangles[3 * t..3 * t + 3];
        *area.entry(r).or_default() += cross(points[s[0]], points[s[1]], points[s[2]]).abs() / 2.0;
    }
    let multi_component = area.len() > 1;
    let root = *area
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(r, _)| r)
        .expect("at least one kept triangle");

    // Boundary edges of the chosen piece, oriented so the interior is on the
    // positive (left in shoelace terms) side.
    let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for e in 0..tri.triangles.len() {
        let t = e / 3;
        if !keep[t] || find(&mut parent, t) != root {
            continue;
        }
        let o = tri.halfedges[e];
        if o != EMPTY && keep[o / 3] {
            continue;
        }
        let s = &tri.triangles[3 * t..3 * t + 3];
        let positive = cross(points[s[0]], points[s[1]], points[s[2]]) > 0.0;
        let (a, b) = (tri.triangles[e], tri.triangles[next_halfedge(e)]);
        let (a, b) = if positive { (a, b) } else { (b, a) };
        outgoing.entry(a).or_default().push(edges.len());
        edges.push((a, b));
    }

    let mut used = vec![false; edges.len()];
    let mut best: Option<Vec<Point>> = None;
    let mut best_area = f64::NEG_INFINITY;
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut e = start;
        loop {
            used[e] = true;
            let (a, b) = edges[e];
            ring.push(points[a]);
            let back = points[a].sub(points[b]);
            // At a pinch vertex take the sharpest turn into the interior so
            // touching loops stay separate.
            let next = outgoing.get(&b).and_then(|cands| {
                cands
                    .iter()
                    .copied()
                    .filter(|&c| !used[c])
                    .min_by(|&x, &y| {
                        let ang = |c: usize| {
                            let d = points[edges[c].1].sub(points[b]);
                            let a = (d.x * back.y - d.y * back.x).atan2(d.x * back.x + d.y * back.y);
                            if a <= 0.0 {
                                a + 2.0 * std::f64::consts::PI
                            } else {
                                a
                            }
                        };
                        ang(x).total_cmp(&ang(y))
                    })
            });
            match next {
                Some(n) => e = n,
                None => break,
            }
        }
        let poly = Polygon::new(ring);
        let a = poly.signed_area();
        if a > best_area {
            best_area = a;
            best = Some(poly.vertices);
        }
    }
    let polygon = Polygon::new(best.unwrap_or_default()).simplified().clockwise();
    if polygon.len() < 3 || polygon.area() <= 0.0 {
        return fallback(&points);
    }
    HullResult {
        polygon,
        multi_component,
        degenerate: false,
    }
}

/// Oriented rectangle around the points along their principal axis, dilated
/// by one pixel on every side.
fn fallback(points: &[Point]) -> HullResult {
    let n = points.len().max(1) as f64;
    let mean = points.iter().fold(Point::new(0.0, 0.0), |acc, p| acc.add(*p)).scale(1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p.sub(mean);
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let u = Point::new(theta.cos(), theta.sin());
    let v = Point::new(-u.y, u.x);
    let (mut u0, mut u1, mut v0, mut v1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in points {
        let d = p.sub(mean);
        let (a, b) = (d.x * u.x + d.y * u.y, d.x * v.x + d.y * v.y);
        u0 = u0.min(a);
        u1 = u1.max(a);
        v0 = v0.min(b);
        v1 = v1.max(b);
    }
    let corner = |a: f64, b: f64| mean.add(u.scale(a)).add(v.scale(b));
    let polygon = Polygon::new(vec![
        corner(u0 - 1.0, v0 - 1.0),
        corner(u1 + 1.0, v0 - 1.0),
        corner(u1 + 1.0, v1 + 1.0),
        corner(u0 - 1.0, v1 + 1.0),
    ])
    .clockwise();
    HullResult {
        polygon,
        multi_component: false,
        degenerate: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::convex_hull;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(x0: u32, y0: u32, w: u32, h: u32) -> Vec<(u32, u32)> {
        (y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| (x, y))).collect()
    }

    fn covers_all(poly: &Polygon, px: &[(u32, u32)]) -> bool {
        px.iter().all(|&(x, y)| {
            let p = Point::new(x as f64, y as f64);
            poly.contains(p) || poly.boundary_distance(p) <= 1.0
        })
    }

    #[test]
    fn square_with_zero_alpha_is_convex_hull() {
        let r = concave_hull(&block(5, 5, 10, 10), 0.0);
        assert!(!r.degenerate && !r.multi_component);
        assert_eq!(r.polygon.len(), 4);
        assert!(r.polygon.signed_area() > 0.0);
        assert!((r.polygon.area() - 81.0).abs() < 1e-9);
    }

    #[test]
    fn l_shape_is_concave_at_default_alpha() {
        let mut px = block(0, 0, 200, 20);
        px.extend(block(0, 20, 20, 180));
        let r = concave_hull(&px, 0.02);
        let pts: Vec<Point> = px.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
        let hull = Polygon::new(convex_hull(&pts));
        assert!(r.polygon.area() < hull.area() * 0.5);
        assert!(covers_all(&r.polygon, &px));
        assert!(!r.polygon.is_self_intersecting());
        assert!(r.polygon.is_clockwise());
    }

    #[test]
    fn disconnected_blobs_keep_larger() {
        let mut px = block(0, 0, 30, 30);
        px.extend(block(300, 300, 10, 10));
        let r = concave_hull(&px, 0.02);
        assert!(r.multi_component);
        let bb = r.polygon.bbox().unwrap();
        assert!(bb.max.x <= 29.0 + 1e-9);
    }

    #[test]
    fn collinear_input_falls_back_to_rectangle() {
        let px: Vec<(u32, u32)> = (0..10).map(|i| (i, 4)).collect();
        let r = concave_hull(&px, 0.02);
        assert!(r.degenerate);
        assert_eq!(r.polygon.len(), 4);
        assert!((r.polygon.area() - 11.0 * 2.0).abs() < 1e-9);
        assert!(covers_all(&r.polygon, &px));
        let single = concave_hull(&[(3, 3)], 0.02);
        assert!(single.degenerate && (single.polygon.area() - 4.0).abs() < 1e-9);
    }

    /// Brute-force alpha complex: every triangle whose circumcircle is empty
    /// and whose circumradius is below the threshold.
    fn oracle_area(points: &[Point], alpha: f64) -> f64 {
        let n = points.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, c) = (points[i], points[j], points[k]);
                    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
                    if d.abs() < 1e-12 {
                        continue;
                    }
                    let sq = |p: Point| p.x * p.x + p.y * p.y;
                    let ux = (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d;
                    let uy = (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d;
                    let center = Point::new(ux, uy);
                    let r = center.dist(a);
                    if r >= 1.0 / alpha {
                        continue;
                    }
                    let empty = (0..n)
                        .filter(|&m| m != i && m != j && m != k)
                        .all(|m| center.dist(points[m]) > r + 1e-9);
                    if empty {
                        total += cross(a, b, c).abs() / 2.0;
                    }
                }
            }
        }
        total
    }

    #[test]
    fn kept_triangles_match_brute_force_alpha_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pts: Vec<Point> = (0..25)
                .map(|_| Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                .collect();
            for alpha in [0.0001, 0.03, 0.06] {
                let got: f64 = alpha_triangles(&pts, alpha)
                    .iter()
                    .map(|t| cross(pts[t[0]], pts[t[1]], pts[t[2]]) / 2.0)
                    .sum();
                let want = oracle_area(&pts, alpha);
                assert!((got - want).abs() < 1e-6, "alpha {alpha}: {got} vs {want}");
            }
        }
    }
}
