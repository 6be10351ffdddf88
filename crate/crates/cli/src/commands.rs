use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mapsynth::annotate::{annotate_layer, render_overlay, AnnotateConfig};
use mapsynth::dataset::{
    self, export_icdar, import_detections, read_manifest, scene_paths, write_manifest, write_scene, ConfigSnapshot,
    ExtendedDocument, ImportedFile, SceneRecord,
};
use mapsynth::font::{BuiltinFont, FontSetProvider, GlyphProvider};
use mapsynth::geodata::{parse_features, parse_font_set, GeoFeature, StyleTable, TileAddress};
use mapsynth::geom::Polygon;
use mapsynth::metrics::{
    aggregate, build_matrices, mean_sweep, score_matrices, sweep_matrices, threshold_grid, EvalConfig, ImageScore,
};
use mapsynth::pipeline::{generate_scene, load_background, parse_scene_id, scene_id, select_scenes, SceneConfig};
use mapsynth::placement::PlacementConfig;
use mapsynth::raster::{ColorIndexMap, TileImage};
use mapsynth::tiles::{fetch_tile, write_atomic, TileSource};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::{AnnotateArgs, EvaluateArgs, FetchArgs, GenerateArgs, StatsArgs, SweepArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or unreadable inputs; exit code 2.
    Usage(String),
    /// Some or all work failed; exit code 1.
    Failed(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

fn failed(e: impl fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn summary(v: serde_json::Value) {
    eprintln!("{v}");
}

fn load_provider(cfg: &RunConfig) -> Result<Box<dyn GlyphProvider>, CliError> {
    let Some(path) = &cfg.font_set else {
        return Ok(Box::new(BuiltinFont));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let paths: Vec<PathBuf> = parse_font_set(&text)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .into_iter()
        .map(|p| base.join(p))
        .collect();
    Ok(Box::new(FontSetProvider::load(&paths).map_err(|e| CliError::Usage(e.to_string()))?))
}

fn load_style(cfg: &RunConfig) -> Result<StyleTable, CliError> {
    let mut table = StyleTable::default();
    if let Some(path) = &cfg.style_table {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        table.extend_from_str(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(table)
}

fn tile_source(cfg: &RunConfig) -> Result<TileSource, CliError> {
    match (&cfg.tile_dir, &cfg.tile_url) {
        (Some(dir), _) => Ok(TileSource::Local(dir.clone())),
        (None, Some(url)) => Ok(TileSource::Remote {
            template: url.clone(),
            cache_dir: cfg.cache_dir(),
        }),
        (None, None) => Err(CliError::Usage("one of --tile-dir or --tile-url is required".into())),
    }
}

fn load_features(cfg: &RunConfig) -> Result<Vec<GeoFeature>, CliError> {
    let path = cfg
        .features
        .as_ref()
        .ok_or_else(|| CliError::Usage("--features is required".into()))?;
    let data = std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let parsed = parse_features(&data).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    eprintln!(
        "features={} skipped_empty_name={} skipped_unsupported={} skipped_invalid={}",
        parsed.features.len(),
        parsed.skipped_empty_name,
        parsed.skipped_unsupported,
        parsed.skipped_invalid
    );
    Ok(parsed.features)
}

fn requested_scenes(cfg: &RunConfig, a: &GenerateArgs, features: &[GeoFeature]) -> Result<Vec<TileAddress>, CliError> {
    let tile_px = cfg.scene_size / 2;
    let mut scenes = if a.scenes.is_empty() {
        select_scenes(features, cfg.zoom, tile_px)
    } else {
        a.scenes
            .iter()
            .map(|id| {
                let (z, x, y) = parse_scene_id(id).ok_or_else(|| CliError::Usage(format!("bad scene id {id:?}")))?;
                if x % 2 != 0 || y % 2 != 0 {
                    return Err(CliError::Usage(format!("scene {id} is not even-aligned")));
                }
                TileAddress::with_size(z, x, y, tile_px).map_err(|e| CliError::Usage(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    if let Some(n) = a.max_scenes {
        scenes.truncate(n);
    }
    Ok(scenes)
}

pub fn snapshot(cfg: &RunConfig, provider: &dyn GlyphProvider) -> ConfigSnapshot {
    ConfigSnapshot {
        seed: cfg.seed.unwrap_or(0),
        zoom: cfg.zoom,
        alpha: cfg.alpha,
        interpolation_distance: cfg.interpolation_distance,
        noise_sigma: cfg.noise_sigma,
        font_set_hash: provider.fingerprint(),
    }
}

fn annotate_config(cfg: &RunConfig) -> AnnotateConfig {
    AnnotateConfig {
        alpha: cfg.alpha,
        interpolation_distance: cfg.interpolation_distance,
        sample_step: cfg.sample_step,
    }
}

fn write_png(path: &Path, img: &TileImage) -> Result<(), String> {
    let bytes = img.encode_png().map_err(|e| e.to_string())?;
    write_atomic(path, &bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn sidecar_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.txt"))
}

pub fn generate(cfg: &RunConfig, a: &GenerateArgs) -> Result<(), CliError> {
    let seed = cfg.seed.ok_or_else(|| CliError::Usage("--seed is required".into()))?;
    let out = cfg.out.clone().ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let features = load_features(cfg)?;
    let source = tile_source(cfg)?;
    let provider = load_provider(cfg)?;
    let scene_cfg = SceneConfig {
        seed,
        placement: PlacementConfig {
            px_per_pt: cfg.px_per_pt,
            letter_spacing: cfg.letter_spacing,
        },
        annotate: annotate_config(cfg),
        style: load_style(cfg)?,
        ink: cfg.ink,
        noise_sigma: cfg.noise_sigma,
        antialias: cfg.antialias,
    };
    let scenes = requested_scenes(cfg, a, &features)?;
    let started = Instant::now();

    let results: Vec<Result<usize, String>> = scenes
        .par_iter()
        .map(|origin| {
            let t0 = Instant::now();
            let id = scene_id(origin);
            let r = (|| -> Result<(usize, usize, usize), String> {
                let bg = load_background(&source, origin).map_err(|e| e.to_string())?;
                let s = generate_scene(*origin, &bg, &features, provider.as_ref(), &scene_cfg)
                    .map_err(|e| e.to_string())?;
                let png = s.image.encode_png().map_err(|e| e.to_string())?;
                write_scene(&out, &s.record, &png).map_err(|e| e.to_string())?;
                if a.keep_colored {
                    let dir = out.join("colored");
                    write_png(&dir.join(format!("{id}.png")), &s.colored)?;
                    let side: String = s
                        .labels
                        .iter()
                        .map(|l| format!("{}\t{}\t{}\n", l.color_index, u8::from(l.overflow), l.text))
                        .collect();
                    let p = sidecar_path(&dir, &id);
                    write_atomic(&p, side.as_bytes()).map_err(|e| format!("{}: {e}", p.display()))?;
                }
                if a.overlay {
                    let img = render_overlay(&s.image, &s.record.records);
                    write_png(&out.join("overlay").join(format!("{id}.png")), &img)?;
                }
                Ok((s.labels.len(), s.record.records.len(), s.tofu))
            })();
            let ms = t0.elapsed().as_millis();
            match r {
                Ok((labels, regions, tofu)) => {
                    eprintln!("scene={id} status=ok labels={labels} regions={regions} tofu={tofu} ms={ms}");
                    Ok(regions)
                }
                Err(e) => {
                    eprintln!("scene={id} status=error ms={ms} error={e:?}");
                    Err(e)
                }
            }
        })
        .collect();

    let ok = results.iter().filter(|r| r.is_ok()).count();
    let failed_n = results.len() - ok;
    let manifest = dataset::stats(&out, snapshot(cfg, provider.as_ref())).map_err(failed)?;
    write_manifest(&out, &manifest).map_err(failed)?;
    summary(json!({
        "command": "generate",
        "scenes_requested": scenes.len(),
        "scenes_ok": ok,
        "scenes_failed": failed_n,
        "regions": results.iter().flatten().sum::<usize>(),
        "manifest_hash": manifest.content_hash,
        "seconds": started.elapsed().as_secs_f64(),
    }));
    if scenes.is_empty() {
        return Err(CliError::Failed("no scenes selected".into()));
    }
    if ok == 0 {
        return Err(CliError::Failed("every scene failed".into()));
    }
    Ok(())
}

/// Sidecar rows `color_index<TAB>overflow<TAB>transcription`.
fn read_sidecar(path: &Path) -> Result<(BTreeMap<u32, String>, BTreeSet<u32>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut texts = BTreeMap::new();
    let mut overflow = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut it = line.splitn(3, '\t');
        let (Some(idx), Some(of), Some(t)) = (it.next(), it.next(), it.next()) else {
            return Err(format!("{}:{}: expected 3 tab-separated fields", path.display(), n + 1));
        };
        let idx: u32 = idx
            .parse()
            .map_err(|_| format!("{}:{}: bad color index {idx:?}", path.display(), n + 1))?;
        if of == "1" {
            overflow.insert(idx);
        }
        texts.insert(idx, t.to_string());
    }
    Ok((texts, overflow))
}

pub fn annotate(cfg: &RunConfig, a: &AnnotateArgs) -> Result<(), CliError> {
    let out = cfg.out.clone().ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let entries = std::fs::read_dir(&a.colored).map_err(|e| CliError::Usage(format!("{}: {e}", a.colored.display())))?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("png"))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(String::from))
        .collect();
    ids.sort();
    let acfg = annotate_config(cfg);
    let colors = ColorIndexMap::new(cfg.ink);
    let results: Vec<Result<usize, String>> = ids
        .par_iter()
        .map(|id| {
            let r = (|| -> Result<usize, String> {
                let img = TileImage::read_png(&a.colored.join(format!("{id}.png"))).map_err(|e| e.to_string())?;
                let (texts, overflow) = read_sidecar(&sidecar_path(&a.colored, id))?;
                let mut layer = annotate_layer(&img, &colors, &texts, &acfg);
                for r in &mut layer.records {
                    r.flags.overflow |= overflow.contains(&r.label_id);
                }
                let scene = SceneRecord {
                    scene_id: id.clone(),
                    width: img.width,
                    height: img.height,
                    records: layer.records,
                };
                let [_, icdar, ext] = scene_paths(&out, id);
                write_atomic(&icdar, export_icdar(&scene).as_bytes()).map_err(|e| e.to_string())?;
                let doc = ExtendedDocument::from_scene(&scene).to_toml();
                write_atomic(&ext, doc.as_bytes()).map_err(|e| e.to_string())?;
                Ok(scene.records.len())
            })();
            match &r {
                Ok(n) => eprintln!("scene={id} status=ok regions={n}"),
                Err(e) => eprintln!("scene={id} status=error error={e:?}"),
            }
            r
        })
        .collect();
    let ok = results.iter().filter(|r| r.is_ok()).count();
    let manifest = dataset::stats(&out, snapshot(cfg, &BuiltinFont)).map_err(failed)?;
    write_manifest(&out, &manifest).map_err(failed)?;
    summary(json!({
        "command": "annotate",
        "scenes_ok": ok,
        "scenes_failed": results.len() - ok,
        "regions": results.iter().flatten().sum::<usize>(),
    }));
    if ok < results.len() {
        return Err(CliError::Failed(format!("{} scenes failed", results.len() - ok)));
    }
    Ok(())
}

fn gt_dir(dir: &Path) -> PathBuf {
    let sub = dir.join(dataset::ICDAR_DIR);
    if sub.is_dir() {
        sub
    } else {
        dir.to_path_buf()
    }
}

fn import(dir: &Path) -> Result<BTreeMap<String, ImportedFile>, CliError> {
    let files = import_detections(&gt_dir(dir)).map_err(|e| CliError::Usage(e.to_string()))?;
    for f in files.values() {
        for e in &f.errors {
            eprintln!("warning file={} line={} error={:?}", f.path.display(), e.line, e.message);
        }
    }
    Ok(files)
}

struct Paired {
    ids: Vec<String>,
    g: Vec<Vec<Polygon>>,
    d: Vec<Vec<Polygon>>,
    mismatched: usize,
    line_errors: usize,
}

fn pair(gt: &Path, det: &Path) -> Result<Paired, CliError> {
    let g = import(gt)?;
    let d = import(det)?;
    let mut mismatched = 0;
    for id in g.keys().filter(|k| !d.contains_key(*k)) {
        eprintln!("warning image={id} missing from detections; excluded");
        mismatched += 1;
    }
    for id in d.keys().filter(|k| !g.contains_key(*k)) {
        eprintln!("warning image={id} missing from ground truth; excluded");
        mismatched += 1;
    }
    let polys = |f: &ImportedFile| f.entries.iter().map(|e| e.polygon.clone()).collect::<Vec<_>>();
    let ids: Vec<String> = g.keys().filter(|k| d.contains_key(*k)).cloned().collect();
    Ok(Paired {
        g: ids.iter().map(|id| polys(&g[id])).collect(),
        d: ids.iter().map(|id| polys(&d[id])).collect(),
        line_errors: g.values().chain(d.values()).map(|f| f.errors.len()).sum(),
        ids,
        mismatched,
    })
}

fn read_series(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let (Some(id), Some(s)) = (rec.get(0), rec.get(1)) {
            out.insert(id.trim().to_string(), s.trim().to_string());
        }
    }
    Ok(out)
}

fn pct(v: Option<f64>) -> String {
    v.map_or("NA".into(), |v| format!("{:.2}", v * 100.0))
}

fn sweep_csv(p: &Paired, range: (f64, f64, f64), k: f64) -> Result<String, CliError> {
    let grid = threshold_grid(range.0, range.1, range.2);
    let tables: Vec<_> = p
        .g
        .par_iter()
        .zip(&p.d)
        .filter_map(|(g, d)| {
            let m = build_matrices(g, d).ok()?;
            sweep_matrices(&m, &grid, &grid, k).ok()
        })
        .collect();
    let table = mean_sweep(&tables).unwrap_or_else(|| mapsynth::metrics::SweepTable {
        t_r: grid.clone(),
        t_p: grid.clone(),
        f1: vec![vec![None; grid.len()]; grid.len()],
    });
    Ok(table.to_csv())
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(|e| failed(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn evaluate(cfg: &RunConfig, a: &EvaluateArgs) -> Result<(), CliError> {
    let eval = EvalConfig {
        t_r: cfg.t_r,
        t_p: cfg.t_p,
        k: cfg.k,
    };
    let series = a.series.as_deref().map(read_series).transpose()?.unwrap_or_default();
    let p = pair(&a.gt, &a.det)?;
    let scored: Vec<Result<ImageScore, String>> = p
        .ids
        .par_iter()
        .zip(p.g.par_iter().zip(&p.d))
        .map(|(id, (g, d))| {
            let m = build_matrices(g, d).map_err(|e| format!("image={id} error={:?}", e.to_string()))?;
            if m.rasterized {
                eprintln!("warning image={id} self-intersecting polygons scored by rasterization");
            }
            Ok(ImageScore {
                image_id: id.clone(),
                series: series.get(id).cloned(),
                score: score_matrices(&m, &eval),
            })
        })
        .collect();
    let mut images = Vec::new();
    let mut errors = 0;
    for r in scored {
        match r {
            Ok(s) => images.push(s),
            Err(e) => {
                eprintln!("warning {e}; excluded");
                errors += 1;
            }
        }
    }
    let report = aggregate(images);
    if let Some(path) = &a.report {
        emit(Some(path), &report.to_csv())?;
    }
    if let Some(range) = a.sweep {
        let target = a
            .sweep_out
            .clone()
            .or_else(|| a.report.as_ref().map(|r| r.with_file_name("sweep.csv")));
        emit(target.as_deref(), &sweep_csv(&p, range, cfg.k)?)?;
    }
    let all = report.all;
    println!(
        "All: precision={} recall={} f1={} images={}",
        pct(all.precision),
        pct(all.recall),
        pct(all.f1),
        all.images
    );
    summary(json!({
        "command": "evaluate",
        "images": all.images,
        "precision": all.precision,
        "recall": all.recall,
        "f1": all.f1,
        "excluded_images": p.mismatched + errors,
        "line_errors": p.line_errors,
    }));
    if p.mismatched + errors > 0 {
        return Err(CliError::Failed(format!("{} images excluded", p.mismatched + errors)));
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig, a: &SweepArgs) -> Result<(), CliError> {
    let p = pair(&a.gt, &a.det)?;
    emit(a.out.as_deref(), &sweep_csv(&p, a.range, cfg.k)?)?;
    summary(json!({
        "command": "sweep",
        "images": p.ids.len(),
        "excluded_images": p.mismatched,
    }));
    if p.mismatched > 0 {
        return Err(CliError::Failed(format!("{} images excluded", p.mismatched)));
    }
    Ok(())
}

pub fn stats(_cfg: &RunConfig, a: &StatsArgs) -> Result<(), CliError> {
    let existing = read_manifest(&a.dir).map_err(failed)?;
    let config = existing.as_ref().map(|m| m.config.clone()).unwrap_or_default();
    let recount = dataset::stats(&a.dir, config).map_err(failed)?;
    print!("{}", recount.to_toml());
    let consistent = existing.as_ref().map(|m| *m == recount);
    if a.write {
        write_manifest(&a.dir, &recount).map_err(failed)?;
    }
    summary(json!({
        "command": "stats",
        "scene_count": recount.scene_count,
        "region_count": recount.region_count,
        "content_hash": recount.content_hash,
        "manifest_consistent": consistent,
    }));
    if consistent == Some(false) && !a.write {
        return Err(CliError::Failed("manifest does not match the dataset contents".into()));
    }
    Ok(())
}

fn parse_tile(s: &str, tile_px: u32) -> Result<TileAddress, CliError> {
    let parts: Vec<&str> = s.trim_end_matches(".png").split('/').collect();
    let bad = || CliError::Usage(format!("expected <z>/<x>/<y>, got {s:?}"));
    let [z, x, y] = parts[..] else { return Err(bad()) };
    TileAddress::with_size(
        z.parse().map_err(|_| bad())?,
        x.parse().map_err(|_| bad())?,
        y.parse().map_err(|_| bad())?,
        tile_px,
    )
    .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn fetch_tiles(cfg: &RunConfig, a: &FetchArgs) -> Result<(), CliError> {
    let template = cfg
        .tile_url
        .clone()
        .ok_or_else(|| CliError::Usage("--tile-url is required".into()))?;
    let cache = cfg.cache_dir();
    let tile_px = cfg.scene_size / 2;
    let mut tiles: Vec<TileAddress> = if a.tiles.is_empty() {
        let features = load_features(cfg)?;
        select_scenes(&features, cfg.zoom, tile_px)
            .iter()
            .flat_map(|o| [(0, 0), (1, 0), (0, 1), (1, 1)].map(|(dx, dy)| o.offset(dx, dy)))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        a.tiles.iter().map(|t| parse_tile(t, tile_px)).collect::<Result<_, _>>()?
    };
    tiles.sort();
    tiles.dedup();
    let results: Vec<bool> = tiles
        .par_iter()
        .map(|t| {
            let name = format!("{}/{}/{}", t.zoom, t.x, t.y);
            let mut attempt = 0;
            loop {
                attempt += 1;
                match fetch_tile(&template, t, &cache) {
                    Ok(_) => {
                        eprintln!("tile={name} status=ok attempts={attempt}");
                        return true;
                    }
                    Err(e) if e.is_retriable() && attempt < a.attempts.max(1) => {
                        std::thread::sleep(Duration::from_millis(250 << attempt.min(5)));
                    }
                    Err(e) => {
                        eprintln!("tile={name} status=error attempts={attempt} error={:?}", e.to_string());
                        return false;
                    }
                }
            }
        })
        .collect();
    let ok = results.iter().filter(|r| **r).count();
    summary(json!({
        "command": "fetch-tiles",
        "tiles": tiles.len(),
        "ok": ok,
        "failed": tiles.len() - ok,
        "cache_dir": cache.display().to_string(),
    }));
    if ok < tiles.len() {
        return Err(CliError::Failed(format!("{} tiles failed", tiles.len() - ok)));
    }
    Ok(())
}
