//! Object-level text detection scoring with one-to-one, split and merge
//! matching over area recall / area precision matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{intersection_area, raster_area, raster_intersection_area, Polygon};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{set} polygon {index} has zero area")]
    ZeroArea { set: &'static str, index: usize },
    #[error("threshold out of [0, 1]: {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub t_r: f64,
    pub t_p: f64,
    /// Match value for splits and merges.
    pub k: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            t_r: 0.5,
            t_p: 0.5,
            k: 1.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for v in [self.t_r, self.t_p, self.k] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricsError::Threshold(v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchMatrices {
    /// `sigma[i][j] = area(G_i ∩ D_j) / area(G_i)`.
    pub sigma: Vec<Vec<f64>>,
    /// `tau[i][j] = area(G_i ∩ D_j) / area(D_j)`.
    pub tau: Vec<Vec<f64>>,
    pub g_area: Vec<f64>,
    pub d_area: Vec<f64>,
    /// Some polygon was self-intersecting and its areas were rasterized.
    pub rasterized: bool,
}

impl MatchMatrices {
    pub fn n_g(&self) -> usize {
        self.g_area.len()
    }

    pub fn n_d(&self) -> usize {
        self.d_area.len()
    }

    /// Matrices of the exchanged problem (detections as ground truth).
    pub fn transposed(&self) -> MatchMatrices {
        let t = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..self.n_d()).map(|j| (0..self.n_g()).map(|i| m[i][j]).collect()).collect()
        };
        MatchMatrices {
            sigma: t(&self.tau),
            tau: t(&self.sigma),
            g_area: self.d_area.clone(),
            d_area: self.g_area.clone(),
            rasterized: self.rasterized,
        }
    }
}

fn raster_step(a: &Polygon, b: &Polygon) -> f64 {
    let span = [a, b]
        .iter()
        .filter_map(|p| p.bbox())
        .map(|bb| bb.width().max(bb.height()))
        .fold(0.0f64, f64::max);
    (span / 512.0).max(1e-3)
}

/// Area recall and precision for every ground-truth / detection pair.
/// Intersections use exact clipping; a self-intersecting polygon is
/// measured by its even-odd filled region on a fine raster instead.
pub fn build_matrices(g: &[Polygon], d: &[Polygon]) -> Result<MatchMatrices, MetricsError> {
    let bad_g: Vec<bool> = g.iter().map(|p| p.is_self_intersecting()).collect();
    let bad_d: Vec<bool> = d.iter().map(|p| p.is_self_intersecting()).collect();
    let area = |p: &Polygon, bad: bool| if bad { raster_area(p, raster_step(p, p)) } else { p.area() };
    let g_area: Vec<f64> = g.iter().zip(&bad_g).map(|(p, &b)| area(p, b)).collect();
    let d_area: Vec<f64> = d.iter().zip(&bad_d).map(|(p, &b)| area(p, b)).collect();
    if let Some(index) = g_area.iter().position(|&a| a <= 0.0) {
        return Err(MetricsError::ZeroArea { set: "ground truth", index });
    }
    if let Some(index) = d_area.iter().position(|&a| a <= 0.0) {
        return Err(MetricsError::ZeroArea { set: "detection", index });
    }
    let mut sigma = vec![vec![0.0; d.len()]; g.len()];
    let mut tau = vec![vec![0.0; d.len()]; g.len()];
    for (i, gp) in g.iter().enumerate() {
        for (j, dp) in d.iter().enumerate() {
            let inter = if bad_g[i] || bad_d[j] {
                raster_intersection_area(gp, dp, raster_step(gp, dp))
            } else {
                intersection_area(gp, dp)
            };
            sigma[i][j] = (inter / g_area[i]).clamp(0.0, 1.0);
            tau[i][j] = (inter / d_area[j]).clamp(0.0, 1.0);
        }
    }
    Ok(MatchMatrices {
        sigma,
        tau,
        g_area,
        d_area,
        rasterized: bad_g.iter().chain(&bad_d).any(|&b| b),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GAssignment {
    None,
    OneToOne(usize),
    Split(Vec<usize>),
    /// Member of the merge matched by this detection.
    MergePart(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DAssignment {
    None,
    OneToOne(usize),
    Merge(Vec<usize>),
    /// Member of the split of this ground truth.
    SplitPart(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchClassification {
    pub g: Vec<GAssignment>,
    pub d: Vec<DAssignment>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub one_to_one: usize,
    pub splits: usize,
    pub merges: usize,
    pub unmatched_g: usize,
    pub unmatched_d: usize,
}

impl MatchClassification {
    pub fn counts(&self) -> MatchCounts {
        MatchCounts {
            one_to_one: self.g.iter().filter(|a| matches!(a, GAssignment::OneToOne(_))).count(),
            splits: self.g.iter().filter(|a| matches!(a, GAssignment::Split(_))).count(),
            merges: self.d.iter().filter(|a| matches!(a, DAssignment::Merge(_))).count(),
            unmatched_g: self.g.iter().filter(|a| **a == GAssignment::None).count(),
            unmatched_d: self.d.iter().filter(|a| **a == DAssignment::None).count(),
        }
    }
}

/// Classifies every polygon of both sets.
///
/// A pair is one-to-one when it is the only pair meeting both thresholds in
/// its row and in its column. `G_i` splits over `S_o = {j : τ_ij ≥ t_p}` when
/// `|S_o| ≥ 2` and `Σ σ_ij ≥ t_r`; `D_j` merges `S_m = {i : σ_ij ≥ t_r}` when
/// `|S_m| ≥ 2` and `Σ τ_ij ≥ t_p`. A polygon takes the first of one-to-one,
/// its own split or merge, membership in the lowest-indexed partner's
/// split or merge.
pub fn classify_matches(m: &MatchMatrices, cfg: &EvalConfig) -> MatchClassification {
    let (ng, nd) = (m.n_g(), m.n_d());
    let both = |i: usize, j: usize| m.sigma[i][j] >= cfg.t_r && m.tau[i][j] >= cfg.t_p;
    let row: Vec<Vec<usize>> = (0..ng).map(|i| (0..nd).filter(|&j| both(i, j)).collect()).collect();
    let col: Vec<Vec<usize>> = (0..nd).map(|j| (0..ng).filter(|&i| both(i, j)).collect()).collect();
    let one_to_one = |i: usize, j: usize| row[i] == [j] && col[j] == [i];

    let split: Vec<Option<Vec<usize>>> = (0..ng)
        .map(|i| {
            let s: Vec<usize> = (0..nd).filter(|&j| m.tau[i][j] >= cfg.t_p).collect();
            let total: f64 = s.iter().map(|&j| m.sigma[i][j]).sum();
            (s.len() >= 2 && total >= cfg.t_r).then_some(s)
        })
        .collect();
    let merge: Vec<Option<Vec<usize>>> = (0..nd)
        .map(|j| {
            let s: Vec<usize> = (0..ng).filter(|&i| m.sigma[i][j] >= cfg.t_r).collect();
            let total: f64 = s.iter().map(|&i| m.tau[i][j]).sum();
            (s.len() >= 2 && total >= cfg.t_p).then_some(s)
        })
        .collect();

    let g = (0..ng)
        .map(|i| {
            if let [j] = row[i][..] {
                if one_to_one(i, j) {
                    return GAssignment::OneToOne(j);
                }
            }
            if let Some(s) = &split[i] {
                return GAssignment::Split(s.clone());
            }
            match (0..nd).find(|&j| merge[j].as_ref().is_some_and(|s| s.contains(&i))) {
                Some(j) => GAssignment::MergePart(j),
                None => GAssignment::None,
            }
        })
        .collect();
    let d = (0..nd)
        .map(|j| {
            if let [i] = col[j][..] {
                if one_to_one(i, j) {
                    return DAssignment::OneToOne(i);
                }
            }
            if let Some(s) = &merge[j] {
                return DAssignment::Merge(s.clone());
            }
            match (0..ng).find(|&i| split[i].as_ref().is_some_and(|s| s.contains(&j))) {
                Some(i) => DAssignment::SplitPart(i),
                None => DAssignment::None,
            }
        })
        .collect();
    MatchClassification { g, d }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    /// `None` when there is no ground truth.
    pub recall: Option<f64>,
    /// `None` when there are no detections.
    pub precision: Option<f64>,
    /// `None` only when both sets are empty; zero when exactly one is.
    pub f1: Option<f64>,
    pub counts: MatchCounts,
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn score_matrices(m: &MatchMatrices, cfg: &EvalConfig) -> Score {
    let c = classify_matches(m, cfg);
    let g_val = |a: &GAssignment| match a {
        GAssignment::None => 0.0,
        GAssignment::OneToOne(_) | GAssignment::MergePart(_) => 1.0,
        GAssignment::Split(_) => cfg.k,
    };
    let d_val = |a: &DAssignment| match a {
        DAssignment::None => 0.0,
        DAssignment::OneToOne(_) | DAssignment::SplitPart(_) => 1.0,
        DAssignment::Merge(_) => cfg.k,
    };
    let recall = (!c.g.is_empty()).then(|| c.g.iter().map(g_val).sum::<f64>() / c.g.len() as f64);
    let precision = (!c.d.is_empty()).then(|| c.d.iter().map(d_val).sum::<f64>() / c.d.len() as f64);
    let f = match (precision, recall) {
        (Some(p), Some(r)) => Some(f1(p, r)),
        (None, None) => None,
        _ => Some(0.0),
    };
    Score {
        recall,
        precision,
        f1: f,
        counts: c.counts(),
    }
}

pub fn score(g: &[Polygon], d: &[Polygon], cfg: &EvalConfig) -> Result<Score, MetricsError> {
    cfg.validate()?;
    Ok(score_matrices(&build_matrices(g, d)?, cfg))
}

/// F1 table with rows over `t_r` and columns over `t_p`, both ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub t_r: Vec<f64>,
    pub t_p: Vec<f64>,
    pub f1: Vec<Vec<Option<f64>>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_r\\t_p");
        for tp in &self.t_p {
            let _ = write!(s, ",{tp}");
        }
        s.push('\n');
        for (tr, row) in self.t_r.iter().zip(&self.f1) {
            let _ = write!(s, "{tr}");
            for v in row {
                match v {
                    Some(v) => {
                        let _ = write!(s, ",{v:.6}");
                    }
                    None => s.push_str(",NA"),
                }
            }
            s.push('\n');
        }
        s
    }
}

fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if let Some(&bad) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(MetricsError::Threshold(bad));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

pub fn sweep_matrices(m: &MatchMatrices, t_r: &[f64], t_p: &[f64], k: f64) -> Result<SweepTable, MetricsError> {
    let (tr, tp) = (sorted_grid(t_r)?, sorted_grid(t_p)?);
    let f1 = tr
        .iter()
        .map(|&r| {
            tp.iter()
                .map(|&p| score_matrices(m, &EvalConfig { t_r: r, t_p: p, k }).f1)
                .collect()
        })
        .collect();
    Ok(SweepTable { t_r: tr, t_p: tp, f1 })
}

pub fn sweep(g: &[Polygon], d: &[Polygon], t_r: &[f64], t_p: &[f64], k: f64) -> Result<SweepTable, MetricsError> {
    sweep_matrices(&build_matrices(g, d)?, t_r, t_p, k)
}

/// Cell-wise mean of the defined F1 values of several same-grid tables.
pub fn mean_sweep(tables: &[SweepTable]) -> Option<SweepTable> {
    let first = tables.first()?;
    if tables.iter().any(|t| t.t_r != first.t_r || t.t_p != first.t_p) {
        return None;
    }
    let f1 = (0..first.t_r.len())
        .map(|a| {
            (0..first.t_p.len())
                .map(|b| {
                    let v: Vec<f64> = tables.iter().filter_map(|t| t.f1[a][b]).collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect()
        })
        .collect();
    Some(SweepTable {
        t_r: first.t_r.clone(),
        t_p: first.t_p.clone(),
        f1,
    })
}

/// Inclusive grid `start, start+step, …, end` (rounded to 1e-9).
pub fn threshold_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return vec![start];
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + step * i as f64) * 1e9).round() / 1e9)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub image_id: String,
    pub series: Option<String>,
    pub score: Score,
}

/// Arithmetic means over images of the values that are defined.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanScore {
    pub images: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub counts: MatchCounts,
}

impl MeanScore {
    fn of<'a>(rows: impl Iterator<Item = &'a ImageScore>) -> Self {
        let mut out = MeanScore::default();
        let (mut p, mut r, mut f) = (Vec::new(), Vec::new(), Vec::new());
        for row in rows {
            out.images += 1;
            p.extend(row.score.precision);
            r.extend(row.score.recall);
            f.extend(row.score.f1);
            let c = row.score.counts;
            out.counts.one_to_one += c.one_to_one;
            out.counts.splits += c.splits;
            out.counts.merges += c.merges;
            out.counts.unmatched_g += c.unmatched_g;
            out.counts.unmatched_d += c.unmatched_d;
        }
        let mean = |v: &Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        out.precision = mean(&p);
        out.recall = mean(&r);
        out.f1 = mean(&f);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub images: Vec<ImageScore>,
    pub series: BTreeMap<String, MeanScore>,
    /// Mean over all images, not over series.
    pub all: MeanScore,
}

pub const UNASSIGNED: &str = "unassigned";

pub fn aggregate(images: Vec<ImageScore>) -> EvalReport {
    let mut keys: Vec<String> = images
        .iter()
        .map(|r| r.series.clone().unwrap_or_else(|| UNASSIGNED.to_string()))
        .collect();
    keys.sort();
    keys.dedup();
    let series = keys
        .into_iter()
        .map(|k| {
            let m = MeanScore::of(
                images
                    .iter()
                    .filter(|r| r.series.as_deref().unwrap_or(UNASSIGNED) == k),
            );
            (k, m)
        })
        .collect();
    let all = MeanScore::of(images.iter());
    EvalReport { images, series, all }
}

impl EvalReport {
    /// Per-image rows, then per-series rows, then the "All" row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.6}"));
        let _ = w.write_record([
            "kind", "id", "series", "images", "precision", "recall", "f1", "one_to_one", "splits", "merges",
            "unmatched_gt", "unmatched_det",
        ]);
        for r in &self.images {
            let c = r.score.counts;
            let _ = w.write_record([
                "image".to_string(),
                r.image_id.clone(),
                r.series.clone().unwrap_or_else(|| UNASSIGNED.into()),
                "1".into(),
                opt(r.score.precision),
                opt(r.score.recall),
                opt(r.score.f1),
                c.one_to_one.to_string(),
                c.splits.to_string(),
                c.merges.to_string(),
                c.unmatched_g.to_string(),
                c.unmatched_d.to_string(),
            ]);
        }
        let mut mean_row = |kind: &str, id: &str, m: &MeanScore| {
            let c = m.counts;
            let _ = w.write_record([
                kind.to_string(),
                id.to_string(),
                id.to_string(),
                m.images.to_string(),
                opt(m.precision),
                opt(m.recall),
                opt(m.f1),
                c.one_to_one.to_string(),
                c.splits.to_string(),
                c.merges.to_string(),
                c.unmatched_g.to_string(),
                c.unmatched_d.to_string(),
            ]);
        };
        for (k, m) in &self.series {
            mean_row("series", k, m);
        }
        mean_row("all", "All", &self.all);
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}
