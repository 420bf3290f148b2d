//! Reading points (CSV) and regions (GeoJSON or WKT), and mapping everything
//! into the unit square.

use anyhow::{anyhow, bail, Context, Result};
use epsraster::{Point2D, PointDataset, PointRecord, Polygon, RegionRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Fraction of the data extent added on every side of the data MBR.
pub const PADDING: f64 = 0.01;

/// Affine map from input coordinates into `[0, 1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub origin_x: f64,
    pub origin_y: f64,
    pub extent: f64,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self { origin_x: 0.0, origin_y: 0.0, extent: 1.0 }
    }

    /// Square around the MBR `(x0, y0)-(x1, y1)` with 1% padding.
    pub fn from_mbr(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let side = (x1 - x0).max(y1 - y0);
        let side = if side > 0.0 { side } else { 1.0 };
        let pad = side * PADDING;
        Self { origin_x: x0 - pad, origin_y: y0 - pad, extent: side + 2.0 * pad }
    }

    pub fn apply(&self, x: f64, y: f64) -> Point2D<f64> {
        Point2D::new((x - self.origin_x) / self.extent, (y - self.origin_y) / self.extent)
    }

    /// Distance in input units to distance in the unit square.
    pub fn scale(&self, d: f64) -> f64 {
        d / self.extent
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// An input record that was skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reject {
    pub file: String,
    /// Line number for CSV and WKT input, feature index for GeoJSON.
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct PointOptions {
    pub x_col: Option<String>,
    pub y_col: Option<String>,
    /// Attribute columns; all fully numeric columns when empty.
    pub attrs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RawPoints {
    pub attr_names: Vec<String>,
    pub rows: Vec<(f64, f64, Vec<f64>)>,
}

type Ring = Vec<(f64, f64)>;

/// A region as read from the file: polygons as rings, outer ring first.
#[derive(Debug, Clone)]
pub struct RawRegion {
    pub id: u64,
    pub location: String,
    pub polygons: Vec<Vec<Ring>>,
}

fn find_col(headers: &csv::StringRecord, wanted: Option<&str>, defaults: &[&str]) -> Result<usize> {
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    match wanted {
        Some(w) => names
            .iter()
            .position(|h| *h == w.to_ascii_lowercase())
            .ok_or_else(|| anyhow!("column `{w}` not found in header")),
        None => defaults
            .iter()
            .find_map(|d| names.iter().position(|h| h == d))
            .ok_or_else(|| anyhow!("no location column; expected one of {defaults:?}")),
    }
}

fn parse_num(s: &str) -> Option<f64> {
    f64::from_str(s.trim()).ok().filter(|v| v.is_finite())
}

pub fn read_points_csv(path: &Path, opts: &PointOptions) -> Result<(RawPoints, Vec<Reject>)> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {file}"))?;
    let headers = rdr.headers()?.clone();
    let xi = find_col(&headers, opts.x_col.as_deref(), &["x", "lon", "lng", "longitude"])?;
    let yi = find_col(&headers, opts.y_col.as_deref(), &["y", "lat", "latitude"])?;

    let mut rejects = Vec::new();
    let mut records = Vec::new();
    for rec in rdr.records() {
        match rec {
            Ok(r) => records.push(r),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                rejects.push(Reject { file: file.clone(), location: format!("line {line}"), reason: e.to_string() });
            }
        }
    }

    let attr_cols: Vec<usize> = if opts.attrs.is_empty() {
        (0..headers.len())
            .filter(|&c| c != xi && c != yi)
            .filter(|&c| {
                let numeric = records.iter().all(|r| r.get(c).and_then(parse_num).is_some());
                if !numeric {
                    log::info!("column `{}` is not numeric; not loaded as an attribute", &headers[c]);
                }
                numeric
            })
            .collect()
    } else {
        opts.attrs.iter().map(|a| find_col(&headers, Some(a), &[])).collect::<Result<_>>()?
    };
    let attr_names = attr_cols.iter().map(|&c| headers[c].trim().to_string()).collect();

    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let line = r.position().map(|p| p.line()).unwrap_or(0);
        let reject = |reason: String| Reject { file: file.clone(), location: format!("line {line}"), reason };
        let (Some(x), Some(y)) = (r.get(xi).and_then(parse_num), r.get(yi).and_then(parse_num)) else {
            rejects.push(reject("unparseable location".into()));
            continue;
        };
        let attrs: Option<Vec<f64>> = attr_cols.iter().map(|&c| r.get(c).and_then(parse_num)).collect();
        match attrs {
            Some(a) => rows.push((x, y, a)),
            None => rejects.push(reject("unparseable attribute".into())),
        }
    }
    Ok((RawPoints { attr_names, rows }, rejects))
}

fn ring_from_json(v: &Value) -> Result<Ring> {
    v.as_array()
        .ok_or_else(|| anyhow!("ring is not an array"))?
        .iter()
        .map(|c| {
            let c = c.as_array().filter(|c| c.len() >= 2).ok_or_else(|| anyhow!("bad coordinate"))?;
            let x = c[0].as_f64().filter(|v| v.is_finite()).ok_or_else(|| anyhow!("bad coordinate"))?;
            let y = c[1].as_f64().filter(|v| v.is_finite()).ok_or_else(|| anyhow!("bad coordinate"))?;
            Ok((x, y))
        })
        .collect()
}

fn polygon_from_json(v: &Value) -> Result<Vec<Ring>> {
    v.as_array().ok_or_else(|| anyhow!("polygon is not an array"))?.iter().map(ring_from_json).collect()
}

fn geometry_from_json(g: &Value) -> Result<Vec<Vec<Ring>>> {
    let coords = g.get("coordinates").ok_or_else(|| anyhow!("geometry has no coordinates"))?;
    match g.get("type").and_then(Value::as_str) {
        Some("Polygon") => Ok(vec![polygon_from_json(coords)?]),
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or_else(|| anyhow!("multipolygon is not an array"))?
            .iter()
            .map(polygon_from_json)
            .collect(),
        Some(t) => bail!("unsupported geometry type {t}"),
        None => bail!("geometry without a type"),
    }
}

fn read_geojson(text: &str, file: &str) -> Result<(Vec<RawRegion>, Vec<Reject>)> {
    let doc: Value = serde_json::from_str(text).with_context(|| format!("parsing {file}"))?;
    let geoms: Vec<Option<&Value>> = match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| anyhow!("{file}: FeatureCollection without features"))?
            .iter()
            .map(|f| f.get("geometry"))
            .collect(),
        Some("Feature") => vec![doc.get("geometry")],
        Some(_) => vec![Some(&doc)],
        None => bail!("{file}: not a GeoJSON object"),
    };
    let mut regions = Vec::new();
    let mut rejects = Vec::new();
    for (i, g) in geoms.into_iter().enumerate() {
        let location = format!("feature {i}");
        match g.ok_or_else(|| anyhow!("feature without geometry")).and_then(geometry_from_json) {
            Ok(polygons) => regions.push(RawRegion { id: i as u64, location, polygons }),
            Err(e) => rejects.push(Reject { file: file.into(), location, reason: e.to_string() }),
        }
    }
    Ok((regions, rejects))
}

fn wkt_ring(ls: &wkt::types::LineString<f64>) -> Ring {
    ls.0.iter().map(|c| (c.x, c.y)).collect()
}

fn wkt_polygon(p: &wkt::types::Polygon<f64>) -> Vec<Ring> {
    p.0.iter().map(wkt_ring).collect()
}

/// One POLYGON or MULTIPOLYGON per non-empty line; `#` starts a comment.
fn read_wkt(text: &str, file: &str) -> (Vec<RawRegion>, Vec<Reject>) {
    let mut regions = Vec::new();
    let mut rejects = Vec::new();
    let mut next_id = 0u64;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = format!("line {}", n + 1);
        let id = next_id;
        next_id += 1;
        let parsed = wkt::Wkt::<f64>::from_str(line).map_err(|e| e.to_string()).and_then(|g| match g {
            wkt::Wkt::Polygon(p) => Ok(vec![wkt_polygon(&p)]),
            wkt::Wkt::MultiPolygon(mp) => Ok(mp.0.iter().map(wkt_polygon).collect()),
            _ => Err("not a POLYGON or MULTIPOLYGON".to_string()),
        });
        match parsed {
            Ok(polygons) => regions.push(RawRegion { id, location, polygons }),
            Err(reason) => rejects.push(Reject { file: file.into(), location, reason }),
        }
    }
    (regions, rejects)
}

pub fn read_regions(path: &Path) -> Result<(Vec<RawRegion>, Vec<Reject>)> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).with_context(|| format!("reading {file}"))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if ext == "geojson" || ext == "json" || text.trim_start().starts_with('{') {
        read_geojson(&text, &file)
    } else {
        Ok(read_wkt(&text, &file))
    }
}

/// Everything a command needs, in unit-square coordinates.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: PointDataset<f64>,
    pub regions: Vec<RegionRecord<f64>>,
    pub norm: Normalizer,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub points: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub point_opts: PointOptions,
}

/// Read, normalize and validate. With `norm` given, that mapping is used
/// instead of one derived from the data.
pub fn ingest(inputs: &Inputs, norm: Option<Normalizer>) -> Result<Dataset> {
    let mut rejects = Vec::new();
    let raw_points = match &inputs.points {
        Some(p) => {
            let (pts, rj) = read_points_csv(p, &inputs.point_opts)?;
            rejects.extend(rj);
            if pts.rows.is_empty() {
                bail!("{}: no valid points", p.display());
            }
            Some(pts)
        }
        None => None,
    };
    let raw_regions = match &inputs.regions {
        Some(p) => {
            let (r, rj) = read_regions(p)?;
            rejects.extend(rj);
            if r.is_empty() {
                bail!("{}: no valid regions", p.display());
            }
            r
        }
        None => Vec::new(),
    };
    if raw_points.is_none() && raw_regions.is_empty() {
        bail!("no input: give --points and/or --regions");
    }

    let norm = norm.unwrap_or_else(|| {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        let mut add = |x: f64, y: f64| {
            b = [b[0].min(x), b[1].min(y), b[2].max(x), b[3].max(y)];
        };
        for (x, y, _) in raw_points.iter().flat_map(|p| &p.rows) {
            add(*x, *y);
        }
        for ring in raw_regions.iter().flat_map(|r| &r.polygons).flatten() {
            for &(x, y) in ring {
                add(x, y);
            }
        }
        Normalizer::from_mbr(b[0], b[1], b[2], b[3])
    });

    let points = match raw_points {
        Some(p) => {
            let recs = p.rows.into_iter().map(|(x, y, a)| PointRecord::new(norm.apply(x, y), a)).collect();
            PointDataset::new(p.attr_names, recs)?
        }
        None => PointDataset::new(Vec::new(), Vec::new())?,
    };
    let file = inputs.regions.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    let mut regions = Vec::with_capacity(raw_regions.len());
    for r in raw_regions {
        let polys: std::result::Result<Vec<Polygon<f64>>, String> = r
            .polygons
            .iter()
            .map(|rings| {
                let mut it = rings.iter().map(|ring| ring.iter().map(|&(x, y)| norm.apply(x, y)).collect::<Vec<_>>());
                let outer = it.next().ok_or("polygon without rings")?;
                Polygon::new(outer, it.collect()).map_err(|e| e.to_string())
            })
            .collect();
        match polys.and_then(|p| RegionRecord::multi(r.id, p).map_err(|e| e.to_string())) {
            Ok(rec) => regions.push(rec),
            Err(reason) => rejects.push(Reject { file: file.clone(), location: r.location, reason }),
        }
    }
    if inputs.regions.is_some() && regions.is_empty() {
        bail!("no valid regions after validation");
    }
    for rj in &rejects {
        log::warn!("rejected {} {}: {}", rj.file, rj.location, rj.reason);
    }
    Ok(Dataset { points, regions, norm, rejects })
}
