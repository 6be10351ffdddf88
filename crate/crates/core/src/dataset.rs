//! Dataset layout, ground-truth file formats and manifests.
//!
//! ```text
//! <root>/images/<scene_id>.png
//! <root>/gt_icdar/gt_<scene_id>.txt   x1,y1,...,xn,yn,transcription
//! <root>/gt_ext/<scene_id>.txt        TOML: polygon, centerline, local height
//! <root>/manifest.toml
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotate::{AnnotationRecord, Axis, Centerline};
use crate::geom::{Point, Polygon};
use crate::tiles::write_atomic;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const IMAGES_DIR: &str = "images";
pub const ICDAR_DIR: &str = "gt_icdar";
pub const EXTENDED_DIR: &str = "gt_ext";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// One exported scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub width: u32,
    pub height: u32,
    pub records: Vec<AnnotationRecord>,
}

/// Integer vertices clamped to the image, consecutive duplicates removed.
pub fn integer_vertices(polygon: &Polygon, width: u32, height: u32) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(polygon.len());
    for p in &polygon.vertices {
        let v = (
            (p.x.round() as i64).clamp(0, width.saturating_sub(1) as i64),
            (p.y.round() as i64).clamp(0, height.saturating_sub(1) as i64),
        );
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let _ = w.write_record(fields);
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// One ICDAR ground-truth line (LF terminated).
pub fn icdar_line(polygon: &Polygon, transcription: &str, width: u32, height: u32) -> String {
    let mut fields: Vec<String> = integer_vertices(polygon, width, height)
        .into_iter()
        .flat_map(|(x, y)| [x.to_string(), y.to_string()])
        .collect();
    fields.push(transcription.to_string());
    csv_line(&fields)
}

pub fn export_icdar(scene: &SceneRecord) -> String {
    scene
        .records
        .iter()
        .map(|r| icdar_line(&r.polygon, &r.transcription, scene.width, scene.height))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcdarEntry {
    /// Clockwise.
    pub polygon: Polygon,
    pub transcription: Option<String>,
    /// Left for the evaluator to repair.
    pub self_intersecting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

fn parse_record(fields: &[String]) -> Result<IcdarEntry, String> {
    let numeric = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let n = fields.len();
    let (coords, transcription) = if n % 2 == 1 {
        (&fields[..n - 1], Some(fields[n - 1].clone()))
    } else if n > 0 && numeric(&fields[n - 1]).is_some() {
        (fields, None)
    } else {
        return Err(format!("odd number of coordinates ({})", n.saturating_sub(1)));
    };
    if coords.len() < 6 {
        return Err(format!("need at least 3 vertices, got {}", coords.len() / 2));
    }
    let mut vals = Vec::with_capacity(coords.len());
    for (k, c) in coords.iter().enumerate() {
        vals.push(numeric(c).ok_or_else(|| format!("field {} is not a number: {c:?}", k + 1))?);
    }
    let polygon = Polygon::new(vals.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect());
    let self_intersecting = polygon.is_self_intersecting();
    if polygon.area() == 0.0 && !self_intersecting {
        return Err("polygon has zero area".into());
    }
    Ok(IcdarEntry {
        polygon: polygon.clockwise(),
        transcription,
        self_intersecting,
    })
}

/// Parses an ICDAR-convention file; bad lines are reported and skipped.
pub fn parse_icdar(text: &str) -> (Vec<IcdarEntry>, Vec<LineError>) {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    for rec in rdr.records() {
        match rec {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line() as usize);
                let fields: Vec<String> = rec.iter().map(String::from).collect();
                if fields.iter().all(|f| f.trim().is_empty()) {
                    continue;
                }
                match parse_record(&fields) {
                    Ok(e) => entries.push(e),
                    Err(message) => errors.push(LineError { line, message }),
                }
            }
            Err(e) => errors.push(LineError {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            }),
        }
    }
    (entries, errors)
}

/// Image id of a ground-truth or detection file name: the stem without a
/// leading `gt_` or `res_`.
pub fn image_id(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    let id = stem
        .strip_prefix("gt_")
        .or_else(|| stem.strip_prefix("res_"))
        .unwrap_or(stem);
    Some(id.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedFile {
    pub path: PathBuf,
    pub entries: Vec<IcdarEntry>,
    pub errors: Vec<LineError>,
}

/// All `*.txt` files of a directory keyed by image id.
pub fn import_detections(dir: &Path) -> Result<BTreeMap<String, ImportedFile>, DatasetError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(id) = image_id(&path) else { continue };
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let text = String::from_utf8_lossy(&bytes);
        let (entries, errors) = parse_icdar(&text);
        out.insert(id, ImportedFile { path, entries, errors });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedFlags {
    pub multi_component: bool,
    pub self_intersecting: bool,
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedRegion {
    pub polygon: Vec<[f64; 2]>,
    pub centerline: Vec<[f64; 2]>,
    pub local_height: f64,
    pub transcription: String,
    pub flags: ExtendedFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedDocument {
    pub scene_id: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub region: Vec<ExtendedRegion>,
}

fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn pairs(points: &[Point], width: u32, height: u32) -> Vec<[f64; 2]> {
    points
        .iter()
        .map(|p| {
            [
                round2(p.x.clamp(0.0, width.saturating_sub(1) as f64)),
                round2(p.y.clamp(0.0, height.saturating_sub(1) as f64)),
            ]
        })
        .collect()
}

impl ExtendedDocument {
    pub fn from_scene(scene: &SceneRecord) -> Self {
        let region = scene
            .records
            .iter()
            .map(|r| ExtendedRegion {
                polygon: pairs(&r.polygon.vertices, scene.width, scene.height),
                centerline: pairs(&r.centerline.points, scene.width, scene.height),
                local_height: round2(r.local_height),
                transcription: r.transcription.clone(),
                flags: ExtendedFlags {
                    multi_component: r.flags.multi_component,
                    self_intersecting: r.flags.self_intersecting,
                    overflow: r.flags.overflow,
                },
            })
            .collect();
        Self {
            scene_id: scene.scene_id.clone(),
            width: scene.width,
            height: scene.height,
            region,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("extended document serializes")
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Records rebuilt from the document; label ids are positions.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        let pts = |v: &[[f64; 2]]| v.iter().map(|p| Point::new(p[0], p[1])).collect::<Vec<_>>();
        self.region
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let centerline = pts(&r.centerline);
                let axis = match (centerline.first(), centerline.last()) {
                    (Some(a), Some(b)) if (b.y - a.y).abs() > (b.x - a.x).abs() => Axis::Y,
                    _ => Axis::X,
                };
                AnnotationRecord {
                    label_id: i as u32 + 1,
                    transcription: r.transcription.clone(),
                    polygon: Polygon::new(pts(&r.polygon)),
                    centerline: Centerline { points: centerline, axis },
                    local_height: r.local_height,
                    flags: crate::annotate::AnnotationFlags {
                        multi_component: r.flags.multi_component,
                        self_intersecting: r.flags.self_intersecting,
                        overflow: r.flags.overflow,
                        ..Default::default()
                    },
                }
            })
            .collect()
    }
}

/// Values recorded so a dataset can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub seed: u64,
    pub zoom: u8,
    pub alpha: f64,
    pub interpolation_distance: f64,
    pub noise_sigma: f64,
    pub font_set_hash: String,
}

impl Default for ConfigSnapshot {
    fn default() -> Self {
        Self {
            seed: 0,
            zoom: 16,
            alpha: 0.02,
            interpolation_distance: 9.0,
            noise_sigma: 0.0,
            font_set_hash: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scene_count: usize,
    pub region_count: usize,
    /// SHA-256 over the scene ids and the bytes of every scene file.
    pub content_hash: String,
    pub config: ConfigSnapshot,
    pub scenes: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Paths of one scene's files under `root`.
pub fn scene_paths(root: &Path, scene_id: &str) -> [PathBuf; 3] {
    [
        root.join(IMAGES_DIR).join(format!("{scene_id}.png")),
        root.join(ICDAR_DIR).join(format!("gt_{scene_id}.txt")),
        root.join(EXTENDED_DIR).join(format!("{scene_id}.txt")),
    ]
}

/// Writes a scene's image and both ground-truth files atomically.
pub fn write_scene(root: &Path, scene: &SceneRecord, png: &[u8]) -> Result<(), DatasetError> {
    let [img, icdar, ext] = scene_paths(root, &scene.scene_id);
    write_atomic(&img, png).map_err(io_err(&img))?;
    write_atomic(&icdar, export_icdar(scene).as_bytes()).map_err(io_err(&icdar))?;
    let doc = ExtendedDocument::from_scene(scene).to_toml();
    write_atomic(&ext, doc.as_bytes()).map_err(io_err(&ext))?;
    Ok(())
}

/// Recounts a dataset directory from its extended ground-truth files.
/// Deterministic: scenes are visited in id order and hashed with their
/// file bytes. A missing directory yields an empty manifest.
pub fn stats(root: &Path, config: ConfigSnapshot) -> Result<DatasetManifest, DatasetError> {
    let ext_dir = root.join(EXTENDED_DIR);
    let mut ids: Vec<String> = Vec::new();
    if ext_dir.is_dir() {
        for entry in std::fs::read_dir(&ext_dir).map_err(io_err(&ext_dir))? {
            let path = entry.map_err(io_err(&ext_dir))?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
    }
    ids.sort();
    let mut hasher = Sha256::new();
    let mut scenes = BTreeMap::new();
    for id in &ids {
        hasher.update((id.len() as u64).to_le_bytes());
        hasher.update(id.as_bytes());
        for path in scene_paths(root, id) {
            let bytes = match std::fs::read(&path) {
                Ok(b) => b,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
                Err(e) => return Err(io_err(&path)(e)),
            };
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
        let ext = scene_paths(root, id)[2].clone();
        let text = std::fs::read_to_string(&ext).map_err(io_err(&ext))?;
        let doc = ExtendedDocument::parse(&text).map_err(|e| DatasetError::Format {
            path: ext.clone(),
            message: e.to_string(),
        })?;
        scenes.insert(id.clone(), doc.region.len());
    }
    Ok(DatasetManifest {
        scene_count: scenes.len(),
        region_count: scenes.values().sum(),
        content_hash: hex::encode(hasher.finalize()),
        config,
        scenes,
    })
}

pub fn write_manifest(root: &Path, manifest: &DatasetManifest) -> Result<(), DatasetError> {
    let path = root.join(MANIFEST_FILE);
    write_atomic(&path, manifest.to_toml().as_bytes()).map_err(io_err(&path))
}

pub fn read_manifest(root: &Path) -> Result<Option<DatasetManifest>, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    match std::fs::read_to_string(&path) {
        Ok(text) => DatasetManifest::parse(&text)
            .map(Some)
            .map_err(|e| DatasetError::Format {
                path,
                message: e.to_string(),
            }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(&path)(e)),
    }
}

/// One line per accepted footprint piece in the ICDAR polygon format.
pub fn footprint_dump(labels: &[crate::placement::PlacedLabel], width: u32, height: u32) -> String {
    labels
        .iter()
        .flat_map(|l| l.footprint.iter().map(move |p| icdar_line(p, &l.text, width, height)))
        .collect()
}
