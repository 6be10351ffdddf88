//! One 512×512 scene end to end: place, render, composite, annotate.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::annotate::{annotate_layer, AnnotateConfig};
use crate::dataset::SceneRecord;
use crate::font::GlyphProvider;
use crate::geodata::{fnv1a, mix_seed, project_to_pixel, GeoError, GeoFeature, StyleTable, TileAddress};
use crate::placement::{project_feature, resolve_collisions, Extent, PlacedLabel, PlacementConfig, Placer};
use crate::raster::{
    add_wornout_noise, composite, concat_tiles, render_colored_layer, render_gray_layer,
    render_gray_layer_antialiased, ColorIndexMap, RasterError, Rgb, TileImage,
};
use crate::tiles::{TileError, TileSource};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error(transparent)]
    Tile(#[from] TileError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("scene origin ({x}, {y}) is not even-aligned")]
    Unaligned { x: u32, y: u32 },
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub seed: u64,
    pub placement: PlacementConfig,
    pub annotate: AnnotateConfig,
    pub style: StyleTable,
    pub ink: Rgb,
    /// Std of the worn-out noise in 8-bit units; 0 disables it.
    pub noise_sigma: f64,
    /// Supersampling factor for the visible text layer; 1 keeps hard alpha.
    pub antialias: u32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            placement: PlacementConfig::default(),
            annotate: AnnotateConfig::default(),
            style: StyleTable::default(),
            ink: [0, 0, 0],
            noise_sigma: 0.0,
            antialias: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub origin: TileAddress,
    pub image: TileImage,
    pub colored: TileImage,
    pub labels: Vec<PlacedLabel>,
    pub record: SceneRecord,
    /// Accepted labels that left no pixels (e.g. all glyphs blank).
    pub absent: Vec<u32>,
    pub tofu: usize,
}

/// `{z}_{x}_{y}` of the top-left tile.
pub fn scene_id(origin: &TileAddress) -> String {
    format!("{}_{}_{}", origin.zoom, origin.x, origin.y)
}

pub fn parse_scene_id(id: &str) -> Option<(u8, u32, u32)> {
    let mut it = id.split('_');
    let z = it.next()?.parse().ok()?;
    let x = it.next()?.parse().ok()?;
    let y = it.next()?.parse().ok()?;
    it.next().is_none().then_some((z, x, y))
}

/// Top-left tiles of the even-aligned 2×2 blocks touched by any feature
/// coordinate, in (x, y) order.
pub fn select_scenes(features: &[GeoFeature], zoom: u8, tile_px: u32) -> Vec<TileAddress> {
    let mut out = BTreeSet::new();
    let max = 1u64 << zoom;
    for f in features {
        for ll in f.geometry.coords() {
            let Ok(t) = TileAddress::containing(ll, zoom, tile_px) else { continue };
            let (x, y) = (t.x & !1, t.y & !1);
            if (x as u64) + 1 < max && (y as u64) + 1 < max {
                out.insert((y, x));
            }
        }
    }
    out.into_iter()
        .filter_map(|(y, x)| TileAddress::with_size(zoom, x, y, tile_px).ok())
        .collect()
}

/// The 2×2 background mosaic whose top-left tile is `origin`.
pub fn load_background(source: &TileSource, origin: &TileAddress) -> Result<TileImage, SceneError> {
    if origin.x % 2 != 0 || origin.y % 2 != 0 {
        return Err(SceneError::Unaligned {
            x: origin.x,
            y: origin.y,
        });
    }
    let t = |dx, dy| -> Result<TileImage, SceneError> { Ok(source.load(&origin.offset(dx, dy)?)?) };
    Ok(concat_tiles(&[t(0, 0)?, t(1, 0)?, t(0, 1)?, t(1, 1)?])?)
}

/// Candidate-generating and collision-resolving step only.
pub fn place_scene(
    origin: &TileAddress,
    features: &[GeoFeature],
    provider: &dyn GlyphProvider,
    config: &SceneConfig,
    width: u32,
    height: u32,
) -> Vec<PlacedLabel> {
    let placer = Placer::new(provider, config.placement, Extent::new(width as f64, height as f64));
    let mut groups = Vec::new();
    for f in features {
        // Cheap rejection of features far outside the scene.
        let near = f.geometry.coords().any(|ll| {
            project_to_pixel(ll, origin).is_ok_and(|p| {
                p.x > -(width as f64) && p.y > -(height as f64) && p.x < 2.0 * width as f64 && p.y < 2.0 * height as f64
            })
        });
        if !near {
            continue;
        }
        let Ok(pf) = project_feature(f, origin) else { continue };
        let font = config.style.assign_style(&f.fclass, mix_seed(config.seed, f.id));
        let c = placer.candidates(&pf, &font);
        if !c.is_empty() {
            groups.push(c);
        }
    }
    resolve_collisions(groups)
}

/// Generates one scene on the given background mosaic.
pub fn generate_scene(
    origin: TileAddress,
    background: &TileImage,
    features: &[GeoFeature],
    provider: &dyn GlyphProvider,
    config: &SceneConfig,
) -> Result<GeneratedScene, SceneError> {
    let (w, h) = (background.width, background.height);
    let labels = place_scene(&origin, features, provider, config, w, h);
    let colors = ColorIndexMap::new(config.ink);
    let (colored, stats) = render_colored_layer(&labels, w, h, provider, &colors)?;
    let gray = if config.antialias > 1 {
        render_gray_layer_antialiased(&labels, w, h, provider, config.ink, config.antialias)?
    } else {
        render_gray_layer(&colored, config.ink)
    };
    let mut image = composite(background, &gray)?;
    let id = scene_id(&origin);
    if config.noise_sigma > 0.0 {
        let noise_seed = mix_seed(config.seed, fnv1a(id.as_bytes()));
        image = add_wornout_noise(&image, &gray.opaque_mask(), config.noise_sigma, noise_seed)?;
    }
    let texts: BTreeMap<u32, String> = labels.iter().map(|l| (l.color_index, l.text.clone())).collect();
    let overflow: BTreeMap<u32, bool> = labels.iter().map(|l| (l.color_index, l.overflow)).collect();
    let mut layer = annotate_layer(&colored, &colors, &texts, &config.annotate);
    for r in &mut layer.records {
        r.flags.overflow |= overflow.get(&r.label_id).copied().unwrap_or(false);
    }
    Ok(GeneratedScene {
        origin,
        record: SceneRecord {
            scene_id: id,
            width: w,
            height: h,
            records: layer.records,
        },
        image,
        colored,
        labels,
        absent: layer.absent,
        tofu: stats.tofu,
    })
}
