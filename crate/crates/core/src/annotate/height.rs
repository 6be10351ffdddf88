//! Exact Euclidean distance transform and local text height.

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        return vec![f64::INFINITY; n];
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
    d
}

/// Squared distance from every cell to the nearest `false` cell of a
/// row-major `w × h` grid (infinite when there is none).
pub fn squared_edt(foreground: &[bool], w: usize, h: usize) -> Vec<f64> {
    let mut g: Vec<f64> = foreground
        .iter()
        .map(|&f| if f { f64::INFINITY } else { 0.0 })
        .collect();
    let mut col = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = g[y * w + x];
        }
        let d = edt_1d(&col);
        for y in 0..h {
            g[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        let d = edt_1d(&g[y * w..(y + 1) * w]);
        g[y * w..(y + 1) * w].copy_from_slice(&d);
    }
    g
}

/// Maximum over foreground pixels of the distance to the nearest background
/// pixel of the `width × height` image. The transform runs on the pixels'
/// bounding box grown by one pixel (clamped to the image); the nearest
/// background pixel of any foreground pixel always lies in that window.
/// Returns `None` when `pixels` is empty or covers the whole image.
pub fn local_height(pixels: &[(u32, u32)], width: u32, height: u32) -> Option<f64> {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    for &(x, y) in pixels {
        if x >= width || y >= height {
            continue;
        }
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x0 == u32::MAX {
        return None;
    }
    let (x0, y0) = (x0.saturating_sub(1), y0.saturating_sub(1));
    let (x1, y1) = ((x1 + 1).min(width - 1), (y1 + 1).min(height - 1));
    let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let mut mask = vec![false; w * h];
    for &(x, y) in pixels {
        if x < width && y < height {
            mask[(y - y0) as usize * w + (x - x0) as usize] = true;
        }
    }
    let d = squared_edt(&mask, w, h);
    let best = mask
        .iter()
        .zip(&d)
        .filter(|(m, _)| **m)
        .map(|(_, d)| *d)
        .fold(0.0f64, f64::max);
    best.is_finite().then(|| best.sqrt())
}
