//! Vector feature ingestion, feature-class styling and Web-Mercator tile math.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

use crate::geom::Point;

/// Latitude bound accepted by the projection (just past the Mercator square).
pub const MAX_LATITUDE: f64 = 85.06;

/// Number of entries in a font set.
pub const FONT_SET_SIZE: usize = 16;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("malformed feature collection at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("latitude {0} outside the Web-Mercator range")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("tile ({x}, {y}) is not valid at zoom {zoom}")]
    InvalidTile { zoom: u8, x: u32, y: u32 },
    #[error("font set: {0}")]
    FontSet(String),
}

/// Longitude / latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn validate(self) -> Result<Self, GeoError> {
        if !(-180.0..=180.0).contains(&self.lon) || !self.lon.is_finite() {
            return Err(GeoError::LongitudeOutOfRange(self.lon));
        }
        if !(self.lat > -MAX_LATITUDE && self.lat < MAX_LATITUDE) {
            return Err(GeoError::LatitudeOutOfRange(self.lat));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(LonLat),
    /// Parts each have at least two points.
    PolylineSet(Vec<Vec<LonLat>>),
    /// Rings are closed (first == last).
    PolygonSet(Vec<Vec<LonLat>>),
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Point(_) => GeometryKind::Point,
            Geometry::PolylineSet(_) => GeometryKind::PolylineSet,
            Geometry::PolygonSet(_) => GeometryKind::PolygonSet,
        }
    }

    pub fn coords(&self) -> Box<dyn Iterator<Item = LonLat> + '_> {
        match self {
            Geometry::Point(p) => Box::new(std::iter::once(*p)),
            Geometry::PolylineSet(parts) | Geometry::PolygonSet(parts) => {
                Box::new(parts.iter().flatten().copied())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Point,
    PolylineSet,
    PolygonSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoFeature {
    pub id: u64,
    pub name: String,
    pub geometry: Geometry,
    pub fclass: String,
}

/// Result of ingesting a feature collection.
#[derive(Debug, Clone, Default)]
pub struct ParsedFeatures {
    pub features: Vec<GeoFeature>,
    pub skipped_empty_name: usize,
    pub skipped_unsupported: usize,
    pub skipped_invalid: usize,
}

/// Parses a GeoJSON-like feature collection. Every feature needs `name` and
/// `fclass` string properties; geometry types Point, LineString,
/// MultiLineString, Polygon and MultiPolygon are accepted. The feature id is
/// taken from the numeric `id` member (or an all-digit `osm_id` property),
/// falling back to the feature's position in the collection.
pub fn parse_features(data: &[u8]) -> Result<ParsedFeatures, GeoError> {
    let doc: Value = serde_json::from_slice(data).map_err(|e| GeoError::Parse {
        offset: byte_offset(data, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeoError::Parse {
            offset: 0,
            message: "missing `features` array".into(),
        })?;

    let mut out = ParsedFeatures::default();
    for (index, feat) in features.iter().enumerate() {
        let props = feat.get("properties");
        let name = props
            .and_then(|p| p.get("name"))
            .and_then(Value::as_str)
            .unwrap_or("")
            .trim();
        if name.is_empty() {
            out.skipped_empty_name += 1;
            continue;
        }
        let fclass = props
            .and_then(|p| p.get("fclass"))
            .and_then(Value::as_str)
            .unwrap_or("")
            .trim();
        let id = feat
            .get("id")
            .and_then(Value::as_u64)
            .or_else(|| {
                props
                    .and_then(|p| p.get("osm_id"))
                    .and_then(|v| v.as_u64().or_else(|| v.as_str().and_then(|s| s.parse().ok())))
            })
            .unwrap_or(index as u64);
        let Some(geom) = feat.get("geometry") else {
            out.skipped_invalid += 1;
            continue;
        };
        match parse_geometry(geom) {
            GeometryParse::Ok(geometry) => out.features.push(GeoFeature {
                id,
                name: name.to_string(),
                geometry,
                fclass: fclass.to_string(),
            }),
            GeometryParse::Unsupported => out.skipped_unsupported += 1,
            GeometryParse::Invalid => out.skipped_invalid += 1,
        }
    }
    Ok(out)
}

fn byte_offset(data: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in data.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(data.len());
        }
        offset += l.len() + 1;
    }
    data.len()
}

enum GeometryParse {
    Ok(Geometry),
    Unsupported,
    Invalid,
}

fn parse_position(v: &Value) -> Option<LonLat> {
    let arr = v.as_array()?;
    let lon = arr.first()?.as_f64()?;
    let lat = arr.get(1)?.as_f64()?;
    LonLat::new(lon, lat).validate().ok()
}

fn parse_line(v: &Value) -> Option<Vec<LonLat>> {
    v.as_array()?.iter().map(parse_position).collect()
}

fn parse_ring(v: &Value) -> Option<Vec<LonLat>> {
    let mut ring = parse_line(v)?;
    if ring.len() < 3 {
        return None;
    }
    if ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    (ring.len() >= 4).then_some(ring)
}

fn parse_geometry(geom: &Value) -> GeometryParse {
    let Some(kind) = geom.get("type").and_then(Value::as_str) else {
        return GeometryParse::Invalid;
    };
    let Some(coords) = geom.get("coordinates") else {
        return GeometryParse::Invalid;
    };
    let parsed = match kind {
        "Point" => parse_position(coords).map(Geometry::Point),
        "LineString" => parse_line(coords)
            .filter(|l| l.len() >= 2)
            .map(|l| Geometry::PolylineSet(vec![l])),
        "MultiLineString" => coords.as_array().and_then(|parts| {
            let lines: Option<Vec<_>> = parts.iter().map(parse_line).collect();
            let lines: Vec<_> = lines?.into_iter().filter(|l| l.len() >= 2).collect();
            (!lines.is_empty()).then_some(Geometry::PolylineSet(lines))
        }),
        // only exterior rings carry label placement
        "Polygon" => coords
            .as_array()
            .and_then(|rings| rings.first())
            .and_then(parse_ring)
            .map(|r| Geometry::PolygonSet(vec![r])),
        "MultiPolygon" => coords.as_array().and_then(|polys| {
            let rings: Option<Vec<_>> = polys
                .iter()
                .map(|p| p.as_array().and_then(|r| r.first()).and_then(parse_ring))
                .collect();
            let rings = rings?;
            (!rings.is_empty()).then_some(Geometry::PolygonSet(rings))
        }),
        _ => return GeometryParse::Unsupported,
    };
    match parsed {
        Some(g) => GeometryParse::Ok(g),
        None => GeometryParse::Invalid,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FontGroup {
    Large,
    Medium,
    Small,
}

impl FontGroup {
    /// Inclusive point-size range.
    pub fn size_range(self) -> (u32, u32) {
        match self {
            FontGroup::Large => (60, 80),
            FontGroup::Medium => (35, 45),
            FontGroup::Small => (20, 30),
        }
    }

    /// Placement priority, lower goes first.
    pub fn priority(self) -> u8 {
        match self {
            FontGroup::Large => 0,
            FontGroup::Medium => 1,
            FontGroup::Small => 2,
        }
    }

    pub fn parse(s: &str) -> Option<FontGroup> {
        match s.trim().to_ascii_lowercase().as_str() {
            "large" => Some(FontGroup::Large),
            "medium" | "med" | "med." => Some(FontGroup::Medium),
            "small" => Some(FontGroup::Small),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FontSpec {
    pub group: FontGroup,
    pub size_pt: u32,
    pub font_id: u8,
}

pub const LARGE_CLASSES: &[&str] = &[
    "canal", "city", "county", "town", "village", "waterfall", "wetland", "island",
];

pub const MEDIUM_CLASSES: &[&str] = &[
    "airfield",
    "airport",
    "allotment",
    "archaeological",
    "battlefield",
    "camp site",
    "cliff",
    "dock",
    "farmland",
    "farm",
    "forest",
    "fort",
    "hamlet",
    "nature reserve",
    "reservoir",
    "ruins",
    "vineyard",
    "rail",
    "river",
    "stream",
];

/// Feature class to font group lookup. Classes match exactly after
/// lower-casing and mapping `_` to a space; anything unlisted is Small.
#[derive(Debug, Clone)]
pub struct StyleTable {
    classes: BTreeMap<String, FontGroup>,
}

impl Default for StyleTable {
    fn default() -> Self {
        let mut t = StyleTable {
            classes: BTreeMap::new(),
        };
        for c in LARGE_CLASSES {
            t.insert(c, FontGroup::Large);
        }
        for c in MEDIUM_CLASSES {
            t.insert(c, FontGroup::Medium);
        }
        t
    }
}

impl StyleTable {
    pub fn empty() -> Self {
        StyleTable {
            classes: BTreeMap::new(),
        }
    }

    fn normalize(fclass: &str) -> String {
        fclass.trim().to_lowercase().replace('_', " ")
    }

    pub fn insert(&mut self, fclass: &str, group: FontGroup) {
        self.classes.insert(Self::normalize(fclass), group);
    }

    /// Reads `class,group` lines (blank lines and `#` comments ignored) on top
    /// of the current table.
    pub fn extend_from_str(&mut self, text: &str) -> Result<(), GeoError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (class, group) = line
                .rsplit_once(',')
                .ok_or_else(|| GeoError::FontSet(format!("style table line {}: expected `class,group`", n + 1)))?;
            let group = FontGroup::parse(group)
                .ok_or_else(|| GeoError::FontSet(format!("style table line {}: unknown group `{group}`", n + 1)))?;
            self.insert(class, group);
        }
        Ok(())
    }

    pub fn group(&self, fclass: &str) -> FontGroup {
        self.classes
            .get(&Self::normalize(fclass))
            .copied()
            .unwrap_or(FontGroup::Small)
    }

    /// Pure function of `(fclass, seed)`: the group comes from the table, the
    /// point size is uniform over the group's range and the font is uniform
    /// over the font set.
    pub fn assign_style(&self, fclass: &str, seed: u64) -> FontSpec {
        let group = self.group(fclass);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(Self::normalize(fclass).as_bytes()));
        let (lo, hi) = group.size_range();
        FontSpec {
            group,
            size_pt: rng.gen_range(lo..=hi),
            font_id: rng.gen_range(0..FONT_SET_SIZE as u8),
        }
    }
}

/// `assign_style` against the default table.
pub fn assign_style(fclass: &str, seed: u64) -> FontSpec {
    StyleTable::default().assign_style(fclass, seed)
}

/// 64-bit FNV-1a, used wherever a platform-stable hash is needed.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mixes two seeds into one (splitmix64 finalizer).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileAddress {
    pub zoom: u8,
    pub x: u32,
    pub y: u32,
    pub tile_px: u32,
}

impl TileAddress {
    pub fn new(zoom: u8, x: u32, y: u32) -> Result<Self, GeoError> {
        Self::with_size(zoom, x, y, 256)
    }

    pub fn with_size(zoom: u8, x: u32, y: u32, tile_px: u32) -> Result<Self, GeoError> {
        if zoom > 30 || (x as u64) >= (1u64 << zoom) || (y as u64) >= (1u64 << zoom) {
            return Err(GeoError::InvalidTile { zoom, x, y });
        }
        Ok(Self { zoom, x, y, tile_px })
    }

    pub fn offset(&self, dx: u32, dy: u32) -> Result<Self, GeoError> {
        Self::with_size(self.zoom, self.x + dx, self.y + dy, self.tile_px)
    }

    fn world_px(&self) -> f64 {
        (1u64 << self.zoom) as f64 * self.tile_px as f64
    }

    /// The tile containing `lonlat` at `zoom`.
    pub fn containing(lonlat: LonLat, zoom: u8, tile_px: u32) -> Result<Self, GeoError> {
        let origin = TileAddress { zoom, x: 0, y: 0, tile_px };
        let p = project_to_pixel(lonlat, &origin)?;
        let n = 1u64 << zoom;
        let x = ((p.x / tile_px as f64).floor() as i64).clamp(0, n as i64 - 1) as u32;
        let y = ((p.y / tile_px as f64).floor() as i64).clamp(0, n as i64 - 1) as u32;
        Self::with_size(zoom, x, y, tile_px)
    }
}

/// Web-Mercator projection into pixel coordinates relative to the top-left
/// corner of `tile`. Points outside the tile land outside `[0, tile_px)`.
pub fn project_to_pixel(lonlat: LonLat, tile: &TileAddress) -> Result<Point, GeoError> {
    let ll = lonlat.validate()?;
    let world = tile.world_px();
    let lat = ll.lat.to_radians();
    let wx = (ll.lon + 180.0) / 360.0 * world;
    let wy = (1.0 - (lat.tan() + 1.0 / lat.cos()).ln() / PI) / 2.0 * world;
    Ok(Point::new(
        wx - tile.x as f64 * tile.tile_px as f64,
        wy - tile.y as f64 * tile.tile_px as f64,
    ))
}

/// Inverse of [`project_to_pixel`].
pub fn pixel_to_lonlat(p: Point, tile: &TileAddress) -> LonLat {
    let world = tile.world_px();
    let wx = p.x + tile.x as f64 * tile.tile_px as f64;
    let wy = p.y + tile.y as f64 * tile.tile_px as f64;
    let lon = wx / world * 360.0 - 180.0;
    let n = PI - 2.0 * PI * wy / world;
    let lat = n.sinh().atan().to_degrees();
    LonLat::new(lon, lat)
}

/// Reads a font-set configuration: 16 font file paths, one per line. Blank
/// lines and `#` comments are ignored.
pub fn parse_font_set(text: &str) -> Result<Vec<String>, GeoError> {
    let paths: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    if paths.len() != FONT_SET_SIZE {
        return Err(GeoError::FontSet(format!(
            "expected {FONT_SET_SIZE} font paths, found {}",
            paths.len()
        )));
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile(z: u8, x: u32, y: u32) -> TileAddress {
        TileAddress::new(z, x, y).unwrap()
    }

    #[test]
    fn origin_projects_to_tile_center_at_zoom_zero() {
        let p = project_to_pixel(LonLat::new(0.0, 0.0), &tile(0, 0, 0)).unwrap();
        assert!((p.x - 128.0).abs() < 1e-9 && (p.y - 128.0).abs() < 1e-9);
    }

    #[test]
    fn origin_is_corner_of_tile_one_one() {
        let p = project_to_pixel(LonLat::new(0.0, 0.0), &tile(1, 1, 1)).unwrap();
        assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9);
    }

    #[test]
    fn zoom16_pixel_matches_slippy_formula() {
        // n = 2^16; xtile = n (lon+180)/360; ytile = n (1 - asinh(tan lat)/pi)/2
        let (lon, lat) = (-3.0f64, 51.5f64);
        let n = 65536.0f64;
        let xt = n * (lon + 180.0) / 360.0;
        let yt = n * (1.0 - lat.to_radians().tan().asinh() / PI) / 2.0;
        let t = tile(16, xt.floor() as u32, yt.floor() as u32);
        let p = project_to_pixel(LonLat::new(lon, lat), &t).unwrap();
        assert!((p.x - (xt - xt.floor()) * 256.0).abs() < 1e-6);
        assert!((p.y - (yt - yt.floor()) * 256.0).abs() < 1e-6);
        assert_eq!((t.x, t.y), (32221, 21794));
    }

    #[test]
    fn latitude_out_of_range_is_rejected() {
        assert!(matches!(
            project_to_pixel(LonLat::new(0.0, 86.0), &tile(0, 0, 0)),
            Err(GeoError::LatitudeOutOfRange(_))
        ));
    }

    #[test]
    fn invalid_tile_rejected() {
        assert!(TileAddress::new(1, 2, 0).is_err());
    }

    #[test]
    fn table_classes_map_to_their_groups() {
        for c in LARGE_CLASSES {
            assert_eq!(assign_style(c, 1).group, FontGroup::Large, "{c}");
        }
        for c in MEDIUM_CLASSES {
            assert_eq!(assign_style(c, 1).group, FontGroup::Medium, "{c}");
        }
        assert_eq!(assign_style("camp_site", 1).group, FontGroup::Medium);
        assert_eq!(assign_style("street", 1).group, FontGroup::Small);
    }

    #[test]
    fn style_sizes_stay_in_group_range() {
        for seed in 0..200 {
            for (c, lo, hi) in [("city", 60, 80), ("forest", 35, 45), ("street", 20, 30)] {
                let s = assign_style(c, seed);
                assert!((lo..=hi).contains(&s.size_pt));
                assert!(s.font_id < 16);
            }
        }
    }

    #[test]
    fn style_table_file_overrides() {
        let mut t = StyleTable::default();
        t.extend_from_str("# comment\nstreet,Medium\n").unwrap();
        assert_eq!(t.group("street"), FontGroup::Medium);
        assert!(t.extend_from_str("street").is_err());
    }

    #[test]
    fn parse_three_points() {
        let doc = br#"{"type":"FeatureCollection","features":[
          {"type":"Feature","id":1,"properties":{"name":"A","fclass":"city"},"geometry":{"type":"Point","coordinates":[0,0]}},
          {"type":"Feature","id":2,"properties":{"name":"B","fclass":"town"},"geometry":{"type":"Point","coordinates":[1,1]}},
          {"type":"Feature","id":3,"properties":{"name":"C","fclass":"farm"},"geometry":{"type":"Point","coordinates":[2,2]}}]}"#;
        let parsed = parse_features(doc).unwrap();
        assert_eq!(parsed.features.len(), 3);
        assert_eq!(parsed.features[2].name, "C");
    }

    #[test]
    fn empty_names_are_skipped_and_counted() {
        let doc = br#"{"features":[
          {"properties":{"name":"","fclass":"city"},"geometry":{"type":"Point","coordinates":[0,0]}},
          {"properties":{"name":"  ","fclass":"city"},"geometry":{"type":"Point","coordinates":[0,0]}},
          {"properties":{"name":"X","fclass":"city"},"geometry":{"type":"Point","coordinates":[0,0]}}]}"#;
        let parsed = parse_features(doc).unwrap();
        assert_eq!(parsed.features.len(), 1);
        assert_eq!(parsed.skipped_empty_name, 2);
    }

    #[test]
    fn unsupported_geometry_counted() {
        let doc = br#"{"features":[
          {"properties":{"name":"X","fclass":"city"},"geometry":{"type":"MultiPoint","coordinates":[[0,0]]}}]}"#;
        let parsed = parse_features(doc).unwrap();
        assert!(parsed.features.is_empty());
        assert_eq!(parsed.skipped_unsupported, 1);
    }

    #[test]
    fn malformed_document_reports_offset() {
        let doc = b"{\"features\": [\n  {\"a\": }\n]}";
        match parse_features(doc) {
            Err(GeoError::Parse { offset, .. }) => assert_eq!(offset, 23),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn font_set_needs_sixteen_entries() {
        let ok: String = (0..16).map(|i| format!("/fonts/{i}.ttf\n")).collect();
        assert_eq!(parse_font_set(&ok).unwrap().len(), 16);
        assert!(parse_font_set("a.ttf\n").is_err());
    }
}
