//! One PASS/FAIL line per acceptance criterion, with pinned tolerances and
//! runtime budgets. Set `ACCEPTANCE_STRICT=1` to exit nonzero on any FAIL.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mapsynth::annotate::{
    compute_raw_centerline, concave_hull, extract_label_pixels, fit_centerline, local_height, polyfit, Axis,
};
use mapsynth::dataset::{icdar_line, integer_vertices, parse_icdar};
use mapsynth::font::BuiltinFont;
use mapsynth::geodata::{FontGroup, FontSpec};
use mapsynth::geom::{convex_hull, intersection_area, Point, Polygon};
use mapsynth::metrics::{
    build_matrices, classify_matches, score, sweep_matrices, threshold_grid, DAssignment,
    EvalConfig, GAssignment, MatchMatrices,
};
use mapsynth::placement::{
    resolve_collisions, Extent, PixelGeometry, PlacementConfig, Placer, ProjectedFeature,
};
use mapsynth::raster::{render_colored_layer, ColorIndexMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance between clipped and pixel-counted σ/τ.
const SIGMA_TAU_TOL: f64 = 0.02;
/// Local height of the 20×100 rectangle.
const RECT_HEIGHT_TOL: f64 = 0.5;
/// Minimum fraction of foreground pixels inside the α=0.02 polygon.
const HULL_COVERAGE: f64 = 0.99;
/// Skeleton distance from the analytic midline, pixels.
const MIDLINE_TOL: f64 = 1.0;
/// Cubic fit and rotation deviations.
const FIT_TOL: f64 = 1e-6;
/// Footprint overlap treated as zero, square pixels.
const OVERLAP_EPS: f64 = 1e-6;
/// Rotation / advance equality for straight lines.
const POSE_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
}

// ---------------------------------------------------------------- metrics

/// Even-odd test written independently of the library.
fn inside(poly: &Polygon, x: f64, y: f64) -> bool {
    let v = &poly.vertices;
    let mut c = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x {
            c = !c;
        }
        j = i;
    }
    c
}

/// σ/τ from pixel-center counting on a 64×64 grid, each pixel split into
/// `sub`×`sub` samples.
fn pixel_matrices(g: &[Polygon], d: &[Polygon], sub: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = 64 * sub;
    let step = 1.0 / sub as f64;
    let mask = |p: &Polygon| -> Vec<bool> {
        (0..n * n)
            .map(|k| inside(p, ((k % n) as f64 + 0.5) * step, ((k / n) as f64 + 0.5) * step))
            .collect()
    };
    let gm: Vec<Vec<bool>> = g.iter().map(mask).collect();
    let dm: Vec<Vec<bool>> = d.iter().map(mask).collect();
    let count = |m: &[bool]| m.iter().filter(|b| **b).count() as f64;
    let mut sigma = vec![vec![0.0; d.len()]; g.len()];
    let mut tau = vec![vec![0.0; d.len()]; g.len()];
    for (i, a) in gm.iter().enumerate() {
        for (j, b) in dm.iter().enumerate() {
            let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count() as f64;
            sigma[i][j] = both / count(a);
            tau[i][j] = both / count(b);
        }
    }
    (sigma, tau)
}

fn max_deviation(m: &MatchMatrices, ps: &[Vec<f64>], pt: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, row) in ps.iter().enumerate() {
        for j in 0..row.len() {
            out.push((m.sigma[i][j] - ps[i][j]).abs().max((m.tau[i][j] - pt[i][j]).abs()));
        }
    }
    out
}

/// Random simple polygon: integer rectangle or star-shaped polygon around a center.
fn random_polygon(r: &mut ChaCha8Rng) -> Polygon {
    if r.gen_bool(0.5) {
        let x0 = r.gen_range(0..44) as f64;
        let y0 = r.gen_range(0..44) as f64;
        let w = r.gen_range(10..=(64 - x0 as i32).min(40)) as f64;
        let h = r.gen_range(10..=(64 - y0 as i32).min(40)) as f64;
        return rect(x0, y0, x0 + w, y0 + h);
    }
    let (cx, cy) = (r.gen_range(20.0..44.0), r.gen_range(20.0..44.0));
    let n = r.gen_range(3..8);
    let mut angles: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let pts: Vec<Point> = angles
        .iter()
        .map(|&a| {
            let rad = r.gen_range(12.0..20.0);
            Point::new((cx + rad * a.cos()).round(), (cy + rad * a.sin()).round())
        })
        .collect();
    let p = Polygon::new(pts);
    if p.area() < 80.0 || p.is_self_intersecting() {
        return random_polygon(r);
    }
    p
}

/// Near-copies and pieces of ground-truth polygons plus strays, so splits,
/// merges and one-to-one matches all occur.
fn random_detections(r: &mut ChaCha8Rng, g: &[Polygon]) -> Vec<Polygon> {
    let n = r.gen_range(0..=4);
    (0..n)
        .map(|_| match (r.gen_range(0..3), g.is_empty()) {
            (0, false) => {
                let p = &g[r.gen_range(0..g.len())];
                let bb = p.bbox().unwrap();
                // keep the copy on the 64×64 grid
                let dx = (r.gen_range(-3..=3) as f64).clamp(-bb.min.x, 64.0 - bb.max.x);
                let dy = (r.gen_range(-3..=3) as f64).clamp(-bb.min.y, 64.0 - bb.max.y);
                Polygon::new(p.vertices.iter().map(|v| Point::new(v.x + dx, v.y + dy)).collect())
            }
            (1, false) => {
                let bb = g[r.gen_range(0..g.len())].bbox().unwrap();
                let mid = ((bb.min.x + bb.max.x) / 2.0).round();
                if r.gen_bool(0.5) {
                    rect(bb.min.x, bb.min.y, mid, bb.max.y)
                } else {
                    rect(mid, bb.min.y, bb.max.x, bb.max.y)
                }
            }
            _ => random_polygon(r),
        })
        .collect()
}

fn random_scene(r: &mut ChaCha8Rng) -> (Vec<Polygon>, Vec<Polygon>) {
    let g: Vec<Polygon> = (0..r.gen_range(0..=4)).map(|_| random_polygon(r)).collect();
    let d = random_detections(r, &g);
    (g, d)
}

/// Literal matching definitions evaluated pair by pair.
fn oracle_classification(m: &MatchMatrices, cfg: &EvalConfig) -> (Vec<GAssignment>, Vec<DAssignment>) {
    let (ng, nd) = (m.sigma.len(), m.sigma.first().map_or(m.d_area.len(), Vec::len));
    let ok = |i: usize, j: usize| m.sigma[i][j] >= cfg.t_r && m.tau[i][j] >= cfg.t_p;
    let mut o2o = vec![vec![false; nd]; ng];
    for i in 0..ng {
        for j in 0..nd {
            let mut unique = ok(i, j);
            for k in 0..nd {
                if k != j && ok(i, k) {
                    unique = false;
                }
            }
            for k in 0..ng {
                if k != i && ok(k, j) {
                    unique = false;
                }
            }
            o2o[i][j] = unique;
        }
    }
    let split_of = |i: usize| -> Option<Vec<usize>> {
        let mut s = Vec::new();
        let mut total = 0.0;
        for j in 0..nd {
            if m.tau[i][j] >= cfg.t_p {
                s.push(j);
                total += m.sigma[i][j];
            }
        }
        if s.len() >= 2 && total >= cfg.t_r {
            Some(s)
        } else {
            None
        }
    };
    let merge_of = |j: usize| -> Option<Vec<usize>> {
        let mut s = Vec::new();
        let mut total = 0.0;
        for i in 0..ng {
            if m.sigma[i][j] >= cfg.t_r {
                s.push(i);
                total += m.tau[i][j];
            }
        }
        if s.len() >= 2 && total >= cfg.t_p {
            Some(s)
        } else {
            None
        }
    };
    let mut g = Vec::new();
    for i in 0..ng {
        let mut a = GAssignment::None;
        if let Some(j) = (0..nd).find(|&j| o2o[i][j]) {
            a = GAssignment::OneToOne(j);
        } else if let Some(s) = split_of(i) {
            a = GAssignment::Split(s);
        } else {
            for j in 0..nd {
                if merge_of(j).is_some_and(|s| s.contains(&i)) {
                    a = GAssignment::MergePart(j);
                    break;
                }
            }
        }
        g.push(a);
    }
    let mut d = Vec::new();
    for j in 0..nd {
        let mut a = DAssignment::None;
        if let Some(i) = (0..ng).find(|&i| o2o[i][j]) {
            a = DAssignment::OneToOne(i);
        } else if let Some(s) = merge_of(j) {
            a = DAssignment::Merge(s);
        } else {
            for i in 0..ng {
                if split_of(i).is_some_and(|s| s.contains(&j)) {
                    a = DAssignment::SplitPart(i);
                    break;
                }
            }
        }
        d.push(a);
    }
    (g, d)
}

fn wolf_oracle() -> Outcome {
    let mut r = rng(101);
    let cfg = EvalConfig::default();
    let (mut worst, mut worst_fine, mut pairs, mut over): (f64, f64, usize, Vec<String>) = (0.0, 0.0, 0, vec![]);
    let mut kinds = BTreeSet::new();
    let scenes = 200;
    for s in 0..scenes {
        let (g, d) = random_scene(&mut r);
        let m = build_matrices(&g, &d).map_err(|e| format!("scene {s}: {e}"))?;
        let (ps, pt) = pixel_matrices(&g, &d, 1);
        let dev = max_deviation(&m, &ps, &pt);
        pairs += dev.len();
        worst = dev.iter().copied().fold(worst, f64::max);
        if dev.iter().any(|&e| e > SIGMA_TAU_TOL) {
            // resample the offending scene finely to separate grid error from clipping error
            let (fs, ft) = pixel_matrices(&g, &d, 8);
            let fine = max_deviation(&m, &fs, &ft);
            for (k, e) in dev.iter().enumerate().filter(|(_, e)| **e > SIGMA_TAU_TOL) {
                worst_fine = worst_fine.max(fine[k]);
                over.push(format!("scene {s} pair {k}: {e:.4} (8x8 subsampled {:.4})", fine[k]));
            }
        }
        let c = classify_matches(&m, &cfg);
        let (og, od) = oracle_classification(&m, &cfg);
        if c.g != og || c.d != od {
            return Err(format!("scene {s}: classification {:?} vs oracle {:?}", (&c.g, &c.d), (og, od)));
        }
        for a in &c.g {
            kinds.insert(match a {
                GAssignment::None => "none",
                GAssignment::OneToOne(_) => "one-to-one",
                GAssignment::Split(_) => "split",
                GAssignment::MergePart(_) => "merge",
            });
        }
    }
    let detail = format!(
        "{scenes} scenes, {pairs} pairs, classification equal to the oracle, max |Δσ|,|Δτ| = {worst:.4} \
         at 64×64 ({} over {SIGMA_TAU_TOL}), {worst_fine:.4} for those pairs at 8×8 subsampling, match kinds: {}",
        over.len(),
        kinds.into_iter().collect::<Vec<_>>().join("/")
    );
    if over.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; over tolerance: {}", over.join(", ")))
    }
}

fn exact_metric_cases() -> Outcome {
    let cfg = EvalConfig::default();
    let g = vec![rect(0.0, 0.0, 100.0, 20.0), rect(0.0, 40.0, 60.0, 60.0)];
    let s = score(&g, &g, &cfg).map_err(|e| e.to_string())?;
    if (s.precision, s.recall, s.f1) != (Some(1.0), Some(1.0), Some(1.0)) {
        return Err(format!("identical: {s:?}"));
    }
    let far = vec![rect(200.0, 200.0, 260.0, 220.0)];
    let s = score(&g, &far, &cfg).map_err(|e| e.to_string())?;
    if (s.precision, s.recall, s.f1) != (Some(0.0), Some(0.0), Some(0.0)) {
        return Err(format!("disjoint: {s:?}"));
    }
    let whole = vec![rect(0.0, 0.0, 100.0, 20.0)];
    let halves = vec![rect(0.0, 0.0, 50.0, 20.0), rect(50.0, 0.0, 100.0, 20.0)];
    let s = score(&whole, &halves, &cfg).map_err(|e| e.to_string())?;
    if (s.recall, s.precision) != (Some(1.0), Some(1.0)) || s.counts.splits != 1 {
        return Err(format!("half/half split: {s:?}"));
    }
    Ok("identical 1/1/1, disjoint 0/0/0, half/half split R=1 P=1".into())
}

fn sweep_monotone() -> Outcome {
    let mut r = rng(202);
    let grid = threshold_grid(0.1, 0.9, 0.1);
    if grid.len() != 9 {
        return Err(format!("grid has {} values", grid.len()));
    }
    let mut scenes = 0;
    while scenes < 10 {
        let (g, d) = random_scene(&mut r);
        if g.is_empty() || d.is_empty() {
            continue;
        }
        scenes += 1;
        let m = build_matrices(&g, &d).map_err(|e| e.to_string())?;
        let t = sweep_matrices(&m, &grid, &grid, 1.0).map_err(|e| e.to_string())?;
        let f = |a: usize, b: usize| t.f1[a][b].unwrap_or(0.0);
        for a in 0..9 {
            for b in 0..9 {
                if (a + 1 < 9 && f(a + 1, b) > f(a, b) + 1e-12) || (b + 1 < 9 && f(a, b + 1) > f(a, b) + 1e-12) {
                    return Err(format!("scene {scenes}: increase at ({}, {})", grid[a], grid[b]));
                }
            }
        }
    }
    Ok("10 scenes × 81 cells non-increasing in t_r and t_p".into())
}

// --------------------------------------------------------------- annotate

/// Exhaustive distance-transform maximum over the whole image.
fn brute_height(fg: &[bool], w: usize, h: usize) -> Option<f64> {
    let bg: Vec<(i64, i64)> = (0..w * h)
        .filter(|&k| !fg[k])
        .map(|k| ((k % w) as i64, (k / w) as i64))
        .collect();
    if bg.is_empty() || fg.iter().all(|b| !b) {
        return None;
    }
    let mut best = 0i64;
    for k in (0..w * h).filter(|&k| fg[k]) {
        let (x, y) = ((k % w) as i64, (k / w) as i64);
        let d = bg.iter().map(|&(bx, by)| (bx - x).pow(2) + (by - y).pow(2)).min().unwrap();
        best = best.max(d);
    }
    Some((best as f64).sqrt())
}

fn local_height_oracle() -> Outcome {
    let mut r = rng(303);
    let mut cases = 0;
    for size in [3usize, 8, 17, 32, 64] {
        for _ in 0..6 {
            let (w, h) = (size, r.gen_range(3..=size));
            let density = r.gen_range(0.2..0.95);
            let mut fg: Vec<bool> = (0..w * h).map(|_| r.gen_bool(density)).collect();
            // a solid block so heights above 1 occur
            let (bx, by) = (r.gen_range(0..w), r.gen_range(0..h));
            let side = r.gen_range(1..=size / 2 + 1);
            for y in by..(by + side).min(h) {
                for x in bx..(bx + side).min(w) {
                    fg[y * w + x] = true;
                }
            }
            let pixels: Vec<(u32, u32)> = (0..w * h)
                .filter(|&k| fg[k])
                .map(|k| ((k % w) as u32, (k / w) as u32))
                .collect();
            let got = local_height(&pixels, w as u32, h as u32);
            let want = brute_height(&fg, w, h);
            cases += 1;
            if got != want {
                return Err(format!("{w}x{h} fixture: got {got:?}, brute force {want:?}"));
            }
        }
    }
    let pixels: Vec<(u32, u32)> = (0..20).flat_map(|y| (0..100).map(move |x| (x + 10, y + 10))).collect();
    let h = local_height(&pixels, 128, 64).ok_or("no height for the rectangle")?;
    if (h - 10.0).abs() > RECT_HEIGHT_TOL {
        return Err(format!("20x100 rectangle: h = {h}"));
    }
    Ok(format!("{cases} fixtures equal to brute force, 20x100 rectangle h = {h}"))
}

fn rendered_words(n: usize, seed: u64) -> Vec<(String, Vec<(u32, u32)>)> {
    let mut r = rng(seed);
    let words = [
        "Ashford", "Elm Brook", "Kings Road", "Mill", "Hollow Wood", "St Mary", "Quarry", "Bywater", "Oxley",
        "Fen", "Wick Lane", "Brampton",
    ];
    let placer = Placer::new(&BuiltinFont, PlacementConfig::default(), Extent::new(512.0, 256.0));
    let mut out = Vec::new();
    while out.len() < n {
        let name = words[r.gen_range(0..words.len())].to_string();
        let font = FontSpec {
            group: FontGroup::Small,
            size_pt: r.gen_range(20..=60),
            font_id: r.gen_range(0..16),
        };
        let f = ProjectedFeature {
            id: out.len() as u64,
            name: name.clone(),
            fclass: "x".into(),
            geometry: PixelGeometry::Point(Point::new(r.gen_range(40.0..200.0), r.gen_range(40.0..200.0))),
        };
        let Some(mut label) = placer.candidates(&f, &font).into_iter().next() else { continue };
        label.color_index = 1;
        let colors = ColorIndexMap::default();
        let (img, _) = render_colored_layer(&[label], 512, 256, &BuiltinFont, &colors).unwrap();
        out.push((name, extract_label_pixels(&img, &colors, 1)));
    }
    out
}

fn alpha_shape() -> Outcome {
    let mut r = rng(404);
    for c in 0..20 {
        let n = r.gen_range(5..200);
        let span = r.gen_range(5..120);
        let pts: BTreeSet<(u32, u32)> = (0..n).map(|_| (r.gen_range(0..span), r.gen_range(0..span))).collect();
        let pixels: Vec<(u32, u32)> = pts.into_iter().collect();
        let as_points: Vec<Point> = pixels.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
        let hull = Polygon::new(convex_hull(&as_points));
        if hull.area() == 0.0 {
            continue;
        }
        for alpha in [0.0, 1e-6] {
            let shape = concave_hull(&pixels, alpha);
            let diff = (shape.polygon.area() - hull.area()).abs();
            let overlap = intersection_area(&shape.polygon, &hull);
            if diff > 1e-9 || (overlap - hull.area()).abs() > 1e-6 {
                return Err(format!(
                    "cloud {c} α={alpha}: area {} vs hull {}",
                    shape.polygon.area(),
                    hull.area()
                ));
            }
        }
    }
    let mut worst: f64 = 1.0;
    for (name, px) in rendered_words(20, 405) {
        let shape = concave_hull(&px, 0.02);
        let inside = px
            .iter()
            .filter(|&&(x, y)| shape.polygon.contains(Point::new(x as f64, y as f64)))
            .count();
        let frac = inside as f64 / px.len() as f64;
        worst = worst.min(frac);
        if frac < HULL_COVERAGE {
            return Err(format!("word {name:?}: coverage {frac:.4}"));
        }
    }
    Ok(format!("20 clouds match the convex hull, min word coverage {worst:.4}"))
}

fn centerline() -> Outcome {
    // Rectangle skeletons against the analytic midline.
    let mut worst: f64 = 0.0;
    for (x0, y0, w, h) in [(10.0, 10.0, 100.0, 20.0), (5.0, 40.0, 200.0, 30.0), (30.0, 5.0, 24.0, 150.0)] {
        let poly = rect(x0, y0, x0 + w, y0 + h);
        let raw = compute_raw_centerline(&poly, 9.0);
        let horizontal = w >= h;
        let (len, lo) = if horizontal { (w, x0) } else { (h, y0) };
        let mid = if horizontal { y0 + h / 2.0 } else { x0 + w / 2.0 };
        let mut n = 0;
        for p in raw.points() {
            let (along, across) = if horizontal { (p.x, p.y) } else { (p.y, p.x) };
            if along >= lo + 0.1 * len && along <= lo + 0.9 * len {
                n += 1;
                worst = worst.max((across - mid).abs());
            }
        }
        if n == 0 {
            return Err(format!("no skeleton points in the central 80% of {w}x{h}"));
        }
        if worst > MIDLINE_TOL {
            return Err(format!("{w}x{h} rectangle: skeleton {worst:.3} px from midline"));
        }
    }
    // Cubic exactness.
    let mut r = rng(505);
    let mut fit_err: f64 = 0.0;
    for _ in 0..20 {
        let c: Vec<f64> = (0..4).map(|k| r.gen_range(-1.0..1.0) * 10f64.powi(-(k as i32))).collect();
        let f = |x: f64| c[0] * 50.0 + c[1] * x + c[2] * x * x + c[3] * x * x * x / 10.0;
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 2.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let p = polyfit(&xs, &ys, 3);
        for &x in &xs {
            fit_err = fit_err.max((p.eval(x) - f(x)).abs());
        }
    }
    if fit_err > FIT_TOL {
        return Err(format!("cubic fit deviation {fit_err:e}"));
    }
    // A quarter turn swaps the fitting axis and rotates the samples.
    let mut rot_err: f64 = 0.0;
    for k in 0..20 {
        let a = r.gen_range(-0.004..0.004);
        let b = r.gen_range(-0.3..0.3);
        let pts: Vec<Point> = (0..30)
            .map(|i| {
                let x = 10.0 + i as f64 * r.gen_range(2.0..5.0) + i as f64;
                Point::new(x, 100.0 + a * (x - 60.0).powi(2) + b * x + r.gen_range(-1.0..1.0))
            })
            .collect();
        let fit = fit_centerline(&pts, None, 2.0).ok_or("fit failed")?;
        let turned: Vec<Point> = pts.iter().map(|p| Point::new(-p.y, p.x)).collect();
        let fit_t = fit_centerline(&turned, None, 2.0).ok_or("fit failed")?;
        if fit.centerline.axis != Axis::X || fit_t.centerline.axis != Axis::Y {
            return Err(format!("fixture {k}: axes {:?} -> {:?}", fit.centerline.axis, fit_t.centerline.axis));
        }
        if fit.centerline.points.len() != fit_t.centerline.points.len() {
            return Err(format!("fixture {k}: sample counts differ"));
        }
        for (p, q) in fit.centerline.points.iter().zip(&fit_t.centerline.points) {
            rot_err = rot_err.max((q.x + p.y).abs()).max((q.y - p.x).abs());
        }
    }
    if rot_err > FIT_TOL {
        return Err(format!("rotated fit deviates by {rot_err:e}"));
    }
    Ok(format!(
        "midline within {worst:.3} px, cubic error {fit_err:.1e}, rotation error {rot_err:.1e} on 20 fixtures"
    ))
}

// -------------------------------------------------------------- placement

fn random_name(r: &mut ChaCha8Rng) -> String {
    let words = r.gen_range(1..=2);
    (0..words)
        .map(|_| {
            let n = r.gen_range(2..9);
            let mut w: String = (0..n).map(|_| r.gen_range(b'a'..=b'z') as char).collect();
            w[..1].make_ascii_uppercase();
            w
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_features(r: &mut ChaCha8Rng, n: usize) -> Vec<(ProjectedFeature, FontSpec, bool)> {
    (0..n)
        .map(|id| {
            let kind = r.gen_range(0..4);
            let straight = kind == 1;
            let geometry = match kind {
                0 => PixelGeometry::Point(Point::new(r.gen_range(0.0..512.0), r.gen_range(0.0..512.0))),
                1 => {
                    let a = Point::new(r.gen_range(-50.0..300.0), r.gen_range(0.0..512.0));
                    let angle: f64 = if r.gen_bool(0.5) { 0.0 } else { r.gen_range(-1.2..1.2) };
                    let len = r.gen_range(100.0..500.0);
                    PixelGeometry::Lines(vec![vec![a, Point::new(a.x + len * angle.cos(), a.y + len * angle.sin())]])
                }
                2 => {
                    let mut p = Point::new(r.gen_range(0.0..512.0), r.gen_range(0.0..512.0));
                    let mut line = vec![p];
                    for _ in 0..r.gen_range(2..8) {
                        p = Point::new(p.x + r.gen_range(10.0..80.0), p.y + r.gen_range(-40.0..40.0));
                        line.push(p);
                    }
                    PixelGeometry::Lines(vec![line])
                }
                _ => {
                    let (cx, cy) = (r.gen_range(0.0..512.0), r.gen_range(0.0..512.0));
                    let rad = r.gen_range(20.0..150.0);
                    let ring: Vec<Point> = (0..8)
                        .map(|k| {
                            let t = k as f64 / 8.0 * std::f64::consts::TAU;
                            let s = rad * r.gen_range(0.6..1.0);
                            Point::new(cx + s * t.cos(), cy + s * t.sin())
                        })
                        .collect();
                    PixelGeometry::Areas(vec![Polygon::new(ring)])
                }
            };
            let group = [FontGroup::Large, FontGroup::Medium, FontGroup::Small][r.gen_range(0..3)];
            let (lo, hi) = group.size_range();
            let font = FontSpec {
                group,
                size_pt: r.gen_range(lo..=hi),
                font_id: r.gen_range(0..16),
            };
            let f = ProjectedFeature {
                id: id as u64,
                name: random_name(r),
                fclass: "x".into(),
                geometry,
            };
            (f, font, straight)
        })
        .collect()
}

fn placement() -> Outcome {
    let placer = Placer::new(&BuiltinFont, PlacementConfig::default(), Extent::new(512.0, 512.0));
    let (mut accepted, mut straight_checked) = (0, 0);
    for scene in 0..100u64 {
        let mut r = rng(600 + scene);
        let n = r.gen_range(5..30);
        let feats = random_features(&mut r, n);
        let groups: Vec<_> = feats.iter().map(|(f, font, _)| placer.candidates(f, font)).collect();
        let labels = resolve_collisions(groups);
        accepted += labels.len();
        for (a, la) in labels.iter().enumerate() {
            for lb in &labels[a + 1..] {
                for p in &la.footprint {
                    for q in &lb.footprint {
                        let ov = intersection_area(p, q);
                        if ov > OVERLAP_EPS {
                            return Err(format!(
                                "scene {scene}: {:?} and {:?} overlap by {ov}",
                                la.text, lb.text
                            ));
                        }
                    }
                }
            }
            let (f, _, straight) = &feats[la.feature_id as usize];
            if !*straight {
                continue;
            }
            let PixelGeometry::Lines(parts) = &f.geometry else { continue };
            let (p0, p1) = (parts[0][0], parts[0][1]);
            let mut angle = (p1.y - p0.y).atan2(p1.x - p0.x);
            if p1.x < p0.x {
                angle = (p0.y - p1.y).atan2(p0.x - p1.x);
            }
            straight_checked += 1;
            for pose in &la.poses {
                if (pose.rotation - angle).abs() > POSE_TOL {
                    return Err(format!("scene {scene}: {:?} rotation {} on a {angle} line", la.text, pose.rotation));
                }
            }
            if angle == 0.0 && la.poses.iter().any(|p| p.rotation != 0.0) {
                return Err(format!("scene {scene}: horizontal {:?} has a nonzero rotation", la.text));
            }
            for w in la.poses.windows(2) {
                let gap = w[0].anchor.dist(w[1].anchor);
                let want = (w[0].advance + w[1].advance) / 2.0;
                if (gap - want).abs() > 1e-6 {
                    return Err(format!("scene {scene}: {:?} advance gap {gap} vs {want}", la.text));
                }
            }
        }
    }
    if straight_checked == 0 {
        return Err("no straight-line label was accepted".into());
    }
    Ok(format!(
        "100 scenes, {accepted} labels pairwise disjoint, {straight_checked} straight-line labels with constant rotation and uniform advances"
    ))
}

// -------------------------------------------------------------- pipeline

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn mapsynth(args: &[&str]) -> Result<std::process::Output, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_mapsynth"))
        .args(args)
        .env_remove("MAPSYNTH_CACHE_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    Ok(o)
}

fn generate_into(dir: &Path, seed: &str) -> Result<(), String> {
    let f = fixtures();
    let o = mapsynth(&[
        "generate",
        "--features",
        f.join("features.geojson").to_str().unwrap(),
        "--tile-dir",
        f.join("tiles").to_str().unwrap(),
        "--seed",
        seed,
        "--noise-sigma",
        "12",
        "--out",
        dir.to_str().unwrap(),
    ])?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    Ok(())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["gt_icdar", "gt_ext", "images"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.join(sub))
            .map(|it| it.filter_map(|e| e.ok().map(|e| e.path())).collect())
            .unwrap_or_default();
        names.sort();
        for p in names {
            out.push((format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap()));
        }
    }
    out
}

fn manifest_hash(dir: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(dir.join("manifest.toml")).map_err(|e| e.to_string())?;
    let v: toml::Value = toml::from_str(&text).map_err(|e| e.to_string())?;
    v["content_hash"].as_str().map(String::from).ok_or("no content_hash".into())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    generate_into(a.path(), "11")?;
    generate_into(b.path(), "11")?;
    let (fa, fb) = (files(a.path()), files(b.path()));
    if fa.is_empty() {
        return Err("no files generated".into());
    }
    if fa != fb {
        let diff: Vec<_> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.clone()).collect();
        return Err(format!("differing files: {diff:?}"));
    }
    let (ha, hb) = (manifest_hash(a.path())?, manifest_hash(b.path())?);
    if ha != hb {
        return Err(format!("manifest hashes {ha} vs {hb}"));
    }
    Ok(format!("{} files byte-identical, manifest hash {}", fa.len(), &ha[..12]))
}

fn format_fidelity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    generate_into(dir.path(), "12")?;
    let gt = dir.path().join("gt_icdar");
    let mut regions = 0;
    for e in std::fs::read_dir(&gt).map_err(|e| e.to_string())? {
        let path = e.map_err(|e| e.to_string())?.path();
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let (entries, errors) = parse_icdar(&text);
        if !errors.is_empty() {
            return Err(format!("{}: {errors:?}", path.display()));
        }
        let again: String = entries
            .iter()
            .map(|e| icdar_line(&e.polygon, e.transcription.as_deref().unwrap_or(""), 512, 512))
            .collect();
        if again != text {
            return Err(format!("{}: re-export differs", path.display()));
        }
        for e in &entries {
            if integer_vertices(&e.polygon, 512, 512).len() != e.polygon.len() {
                return Err(format!("{}: polygon changed on re-import", path.display()));
            }
        }
        regions += entries.len();
    }
    let o = mapsynth(&["evaluate", "--gt", dir.path().to_str().unwrap(), "--det", gt.to_str().unwrap()])?;
    let out = String::from_utf8_lossy(&o.stdout);
    if !o.status.success() || !out.contains("All: precision=100.00 recall=100.00 f1=100.00") {
        return Err(format!("evaluate(gt, gt) printed {out:?}"));
    }
    Ok(format!("{regions} regions round-trip exactly, evaluate(gt, gt) All 100/100/100"))
}

// --------------------------------------------------------------------- main

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("wolf metric oracle equivalence", Duration::from_secs(30), wolf_oracle),
        ("exact metric cases", Duration::from_secs(1), exact_metric_cases),
        ("sweep monotonicity", Duration::from_secs(10), sweep_monotone),
        ("local height", Duration::from_secs(5), local_height_oracle),
        ("alpha shape", Duration::from_secs(30), alpha_shape),
        ("centerline", Duration::from_secs(30), centerline),
        ("placement", Duration::from_secs(60), placement),
        ("end-to-end determinism", Duration::from_secs(60), determinism),
        ("format fidelity", Duration::from_secs(60), format_fidelity),
    ];
    let mut failures = 0;
    let mut stdout = std::io::stdout().lock();
    for (name, budget, check) in criteria {
        let t0 = Instant::now();
        let outcome = check();
        let took = t0.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if took <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failures += 1;
        }
        let _ = writeln!(
            stdout,
            "{status} {name} ({:.2} s, budget {} s): {detail}",
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    let _ = writeln!(stdout, "acceptance: {} passed, {failures} failed", 9 - failures);
    // The report is the product; a failing criterion only fails the run on request.
    if failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
