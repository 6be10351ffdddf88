//! Background tiles from a `{z}/{x}/{y}` template server or a local directory.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::geodata::TileAddress;
use crate::raster::TileImage;

#[derive(Debug, Error)]
pub enum TileError {
    #[error("template must contain {{z}}, {{x}} and {{y}}: {0}")]
    Template(String),
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("HTTP {status} from {url}")]
    Status { status: u16, url: String },
    #[error("{source_name} is not a {expected}px PNG tile: {message}")]
    Format {
        source_name: String,
        expected: u32,
        message: String,
    },
    #[error("missing local tile {0}")]
    Missing(PathBuf),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl TileError {
    /// Whether retrying the same request may succeed.
    pub fn is_retriable(&self) -> bool {
        match self {
            TileError::Network { .. } => true,
            TileError::Status { status, .. } => *status >= 500 || *status == 429,
            _ => false,
        }
    }
}

pub fn tile_url(template: &str, tile: &TileAddress) -> Result<String, TileError> {
    if !["{z}", "{x}", "{y}"].iter().all(|k| template.contains(k)) {
        return Err(TileError::Template(template.to_string()));
    }
    Ok(template
        .replace("{z}", &tile.zoom.to_string())
        .replace("{x}", &tile.x.to_string())
        .replace("{y}", &tile.y.to_string()))
}

/// `<root>/<z>/<x>/<y>.png`
pub fn tile_path(root: &Path, tile: &TileAddress) -> PathBuf {
    root.join(tile.zoom.to_string())
        .join(tile.x.to_string())
        .join(format!("{}.png", tile.y))
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes through a uniquely named sibling temp file and renames it into
/// place, so readers never observe partial files and concurrent writers of
/// the same path leave one complete copy.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn decode(bytes: &[u8], tile: &TileAddress, source_name: &str) -> Result<TileImage, TileError> {
    let img = TileImage::decode_png(bytes).map_err(|e| TileError::Format {
        source_name: source_name.to_string(),
        expected: tile.tile_px,
        message: e.to_string(),
    })?;
    if img.width != tile.tile_px || img.height != tile.tile_px {
        return Err(TileError::Format {
            source_name: source_name.to_string(),
            expected: tile.tile_px,
            message: format!("got {}x{}", img.width, img.height),
        });
    }
    Ok(img.with_address(*tile))
}

/// Returns the cached tile when present, otherwise downloads it once,
/// validates it and stores it in the cache.
pub fn fetch_tile(template: &str, tile: &TileAddress, cache_dir: &Path) -> Result<TileImage, TileError> {
    let url = tile_url(template, tile)?;
    let path = tile_path(cache_dir, tile);
    if let Ok(bytes) = std::fs::read(&path) {
        return decode(&bytes, tile, &path.display().to_string());
    }
    let resp = match ureq::get(&url).call() {
        Ok(r) => r,
        Err(ureq::Error::Status(status, _)) => return Err(TileError::Status { status, url }),
        Err(e) => {
            return Err(TileError::Network {
                url,
                message: e.to_string(),
            })
        }
    };
    let mut bytes = Vec::new();
    resp.into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| TileError::Network {
            url: url.clone(),
            message: e.to_string(),
        })?;
    let img = decode(&bytes, tile, &url)?;
    write_atomic(&path, &bytes).map_err(|source| TileError::Io { path, source })?;
    Ok(img)
}

/// Where background tiles come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TileSource {
    Remote { template: String, cache_dir: PathBuf },
    /// Pre-rendered tiles laid out like the cache.
    Local(PathBuf),
}

impl TileSource {
    pub fn load(&self, tile: &TileAddress) -> Result<TileImage, TileError> {
        match self {
            TileSource::Remote { template, cache_dir } => fetch_tile(template, tile, cache_dir),
            TileSource::Local(root) => {
                let path = tile_path(root, tile);
                let bytes = std::fs::read(&path).map_err(|source| {
                    if source.kind() == std::io::ErrorKind::NotFound {
                        TileError::Missing(path.clone())
                    } else {
                        TileError::Io {
                            path: path.clone(),
                            source,
                        }
                    }
                })?;
                decode(&bytes, tile, &path.display().to_string())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_substitution() {
        let t = TileAddress::new(16, 32221, 21794).unwrap();
        assert_eq!(
            tile_url("https://h/{z}/{x}/{y}.png", &t).unwrap(),
            "https://h/16/32221/21794.png"
        );
        assert!(matches!(tile_url("https://h/{z}/{x}.png", &t), Err(TileError::Template(_))));
    }

    #[test]
    fn cache_layout() {
        let t = TileAddress::new(3, 1, 2).unwrap();
        assert_eq!(tile_path(Path::new("/c"), &t), PathBuf::from("/c/3/1/2.png"));
    }

    #[test]
    fn local_source_validates_size() {
        let dir = tempfile::tempdir().unwrap();
        let t = TileAddress::new(2, 1, 1).unwrap();
        let src = TileSource::Local(dir.path().to_path_buf());
        assert!(matches!(src.load(&t), Err(TileError::Missing(_))));
        let small = TileImage::filled(8, 8, [1, 2, 3, 255]).encode_png().unwrap();
        write_atomic(&tile_path(dir.path(), &t), &small).unwrap();
        assert!(matches!(src.load(&t), Err(TileError::Format { .. })));
        let ok = TileImage::filled(256, 256, [1, 2, 3, 255]).encode_png().unwrap();
        write_atomic(&tile_path(dir.path(), &t), &ok).unwrap();
        let img = src.load(&t).unwrap();
        assert_eq!(img.address, Some(t));
        assert_eq!(img.get(5, 5), [1, 2, 3, 255]);
    }
}
