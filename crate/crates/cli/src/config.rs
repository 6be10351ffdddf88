//! Effective run configuration: flags over config file over defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const CACHE_ENV: &str = "MAPSYNTH_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub scene_size: u32,
    pub zoom: u8,
    pub tile_url: Option<String>,
    pub tile_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub font_set: Option<PathBuf>,
    pub style_table: Option<PathBuf>,
    pub alpha: f64,
    pub interpolation_distance: f64,
    pub sample_step: f64,
    pub px_per_pt: f64,
    pub letter_spacing: f64,
    pub noise_sigma: f64,
    pub antialias: u32,
    pub ink: [u8; 3],
    pub out: Option<PathBuf>,
    pub t_r: f64,
    pub t_p: f64,
    pub k: f64,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            scene_size: 512,
            zoom: 16,
            tile_url: None,
            tile_dir: None,
            cache_dir: None,
            features: None,
            font_set: None,
            style_table: None,
            alpha: 0.02,
            interpolation_distance: 9.0,
            sample_step: 2.0,
            px_per_pt: 0.5,
            letter_spacing: 1.0,
            noise_sigma: 0.0,
            antialias: 1,
            ink: [0, 0, 0],
            out: None,
            t_r: 0.5,
            t_p: 0.5,
            k: 1.0,
            jobs: 0,
        }
    }
}

impl RunConfig {
    /// Defaults, then the file, then the cache-dir environment variable.
    /// Relative paths in the file are resolved against its directory.
    pub fn load(file: Option<&Path>) -> Result<Self, String> {
        let mut cfg = match file {
            None => RunConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new("."));
                for p in [
                    &mut cfg.tile_dir,
                    &mut cfg.features,
                    &mut cfg.font_set,
                    &mut cfg.style_table,
                    &mut cfg.out,
                    &mut cfg.cache_dir,
                ]
                .into_iter()
                .flatten()
                {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                cfg
            }
        };
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
            cfg.cache_dir = Some(PathBuf::from(dir));
        }
        Ok(cfg)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| PathBuf::from("tile-cache"))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.scene_size < 64 || self.scene_size % 2 != 0 {
            return Err(format!("scene_size must be even and >= 64, got {}", self.scene_size));
        }
        if self.zoom > 24 {
            return Err(format!("zoom must be <= 24, got {}", self.zoom));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha must be >= 0, got {}", self.alpha));
        }
        for (name, v) in [
            ("interpolation_distance", self.interpolation_distance),
            ("sample_step", self.sample_step),
            ("px_per_pt", self.px_per_pt),
            ("letter_spacing", self.letter_spacing),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(1..=8).contains(&self.antialias) {
            return Err(format!("antialias must be in 1..=8, got {}", self.antialias));
        }
        for (name, v) in [("t_r", self.t_r), ("t_p", self.t_p), ("k", self.k)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// `r,g,b` with components in 0..=255.
pub fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected r,g,b, got {s:?}"));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("bad color component {p:?}"))?;
    }
    Ok(out)
}

/// `start:end:step`.
pub fn parse_range(s: &str) -> Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected start:end:step, got {s:?}"))?;
    match v[..] {
        [a, b, step] if step > 0.0 && a <= b && a >= 0.0 && b <= 1.0 => Ok((a, b, step)),
        _ => Err(format!("expected 0 <= start <= end <= 1 and step > 0, got {s:?}")),
    }
}
