//! Polynomial smoothing of skeletons into ordered centerlines.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geom::{Point, Polygon};

/// Independent variable of the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centerline {
    pub points: Vec<Point>,
    pub axis: Axis,
}

impl Centerline {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Strictly increasing in the independent coordinate.
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| match self.axis {
            Axis::X => w[1].x > w[0].x,
            Axis::Y => w[1].y > w[0].y,
        })
    }
}

/// Least-squares polynomial in a centered, scaled variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub scale: f64,
}

impl Poly {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let t = (u - self.center) / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

pub fn polyfit(u: &[f64], v: &[f64], degree: usize) -> Poly {
    let n = u.len();
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = (lo + hi) / 2.0;
    let scale = ((hi - lo) / 2.0).max(1e-12);
    let a = DMatrix::from_fn(n, degree + 1, |i, j| ((u[i] - center) / scale).powi(j as i32));
    let b = DVector::from_column_slice(v);
    let coeffs = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map(|c| c.iter().copied().collect())
        .unwrap_or_else(|_| vec![v.iter().sum::<f64>() / n as f64]);
    Poly { coeffs, center, scale }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub centerline: Centerline,
    pub degree: usize,
    /// Fewer than four points were available, so the degree was lowered.
    pub reduced_degree: bool,
}

/// Fits `v = f(u)` with `f` cubic, choosing `u` as the coordinate with the
/// larger range (x on ties), samples the curve every `step` pixels of arc
/// length over the points' extent and keeps samples inside `clip`.
pub fn fit_centerline(points: &[Point], clip: Option<&Polygon>, step: f64) -> Option<FitResult> {
    if points.len() < 2 {
        return None;
    }
    let range = |f: fn(&Point) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (xlo, xhi) = range(|p| p.x);
    let (ylo, yhi) = range(|p| p.y);
    let axis = if xhi - xlo >= yhi - ylo { Axis::X } else { Axis::Y };
    let (u, v): (Vec<f64>, Vec<f64>) = match axis {
        Axis::X => points.iter().map(|p| (p.x, p.y)).unzip(),
        Axis::Y => points.iter().map(|p| (p.y, p.x)).unzip(),
    };
    let (lo, hi) = match axis {
        Axis::X => (xlo, xhi),
        Axis::Y => (ylo, yhi),
    };
    if hi - lo <= 0.0 {
        return None;
    }
    let mut distinct = u.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let degree = 3.min(distinct.len() - 1);
    let poly = polyfit(&u, &v, degree);

    let to_point = |uu: f64| match axis {
        Axis::X => Point::new(uu, poly.eval(uu)),
        Axis::Y => Point::new(poly.eval(uu), uu),
    };
    let dense_n = (((hi - lo) * 8.0).ceil() as usize).max(64);
    let dense: Vec<Point> = (0..=dense_n)
        .map(|i| to_point(lo + (hi - lo) * i as f64 / dense_n as f64))
        .collect();
    let step = step.max(1e-6);
    let mut sampled = vec![dense[0]];
    let mut next = step;
    let mut acc = 0.0;
    for w in dense.windows(2) {
        let seg = w[0].dist(w[1]);
        while acc + seg >= next && seg > 0.0 {
            sampled.push(w[0].lerp(w[1], (next - acc) / seg));
            next += step;
        }
        acc += seg;
    }
    let last = dense[dense_n];
    if sampled.last().is_some_and(|p| p.dist(last) > 1e-9) {
        sampled.push(last);
    }
    let key = |p: &Point| match axis {
        Axis::X => p.x,
        Axis::Y => p.y,
    };
    let mut pts: Vec<Point> = sampled
        .into_iter()
        .filter(|p| clip.map_or(true, |c| c.contains(*p)))
        .collect();
    pts.dedup_by(|b, a| key(b) <= key(a));
    if pts.len() < 2 {
        return None;
    }
    Some(FitResult {
        centerline: Centerline { points: pts, axis },
        degree,
        reduced_degree: points.len() < 4,
    })
}
