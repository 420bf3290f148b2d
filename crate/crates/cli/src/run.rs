//! Subcommand bodies.

use crate::ingest::{ingest, Dataset, Inputs, Normalizer};
use anyhow::{bail, Context, Result};
use epsraster::act::AdaptiveCellTrie;
use epsraster::canvas::{blend, render_region, BlendFn, Canvas, Channel};
use epsraster::grid::level_for_bound;
use epsraster::pointindex::{lps_build_filtered, rs_build, LinearizedPointSet, RadixSplineIndex};
use epsraster::query::{build_act, join_act_indexed, join_canvas, join_pointindex};
use epsraster::raster::rasterize_region;
use epsraster::{Aggregate, AggregationQuery, AttrFilter, CellId, GridConfig, JoinOptions, RasterMode, RegionResult};
use serde::Serialize;
use serde_json::{Map, Value};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Act,
    PointIndex,
    Canvas,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Act, Engine::PointIndex, Engine::Canvas];

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Act => "act",
            Engine::PointIndex => "pointindex",
            Engine::Canvas => "canvas",
        }
    }
}

pub fn mode_name(m: RasterMode) -> &'static str {
    match m {
        RasterMode::Conservative => "conservative",
        RasterMode::CenterSampled => "center",
    }
}

/// Query settings shared by `join`, `query`, `bench` and `audit`.
#[derive(Debug, Clone)]
pub struct QuerySpec {
    /// In input units.
    pub epsilons: Vec<f64>,
    pub mode: RasterMode,
    pub agg: Aggregate,
    pub filter: Option<AttrFilter>,
    pub opts: JoinOptions,
}

impl QuerySpec {
    fn query(&self, eps_unit: f64) -> Result<AggregationQuery<f64>> {
        Ok(AggregationQuery::new(self.agg.clone(), eps_unit, self.mode)?.with_filter(self.filter.clone()))
    }
}

pub fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json<W: Write + ?Sized, S: Serialize>(w: &mut W, v: &S) -> Result<()> {
    serde_json::to_writer(&mut *w, v)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ResultLine {
    pub region_id: u64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub agg: String,
    pub epsilon: f64,
    pub mode: &'static str,
    pub engine: &'static str,
}

impl ResultLine {
    fn new(r: &RegionResult, spec: &QuerySpec, eps: f64, engine: Engine) -> Self {
        ResultLine {
            region_id: r.region_id,
            alpha: r.alpha,
            beta: r.beta,
            lo: r.range.map(|x| x.0),
            hi: r.range.map(|x| x.1),
            agg: spec.agg.to_string(),
            epsilon: eps,
            mode: mode_name(spec.mode),
            engine: engine.name(),
        }
    }
}

#[derive(Debug, Serialize)]
struct IngestSummary<'a> {
    points: usize,
    regions: usize,
    attributes: &'a [String],
    normalizer: Normalizer,
    rejects: &'a [crate::ingest::Reject],
}

pub fn cmd_ingest(inputs: &Inputs, out: Option<&Path>) -> Result<()> {
    let ds = ingest(inputs, None)?;
    let mut w = open_out(out)?;
    write_json(
        &mut w,
        &IngestSummary {
            points: ds.points.len(),
            regions: ds.regions.len(),
            attributes: ds.points.attr_names(),
            normalizer: ds.norm,
            rejects: &ds.rejects,
        },
    )?;
    w.flush()?;
    Ok(())
}

/// Covering dump, one `region_id level code I|B` line per cell.
pub fn cmd_rasterize(inputs: &Inputs, epsilon: f64, mode: RasterMode, out: Option<&Path>, pgm: Option<&Path>) -> Result<()> {
    let ds = ingest(inputs, None)?;
    if ds.regions.is_empty() {
        bail!("rasterize needs --regions");
    }
    let grid = GridConfig::<f64>::unit(0)?;
    let eps = ds.norm.scale(epsilon);
    let mut w = open_out(out)?;
    for r in &ds.regions {
        let cov = rasterize_region(r, &grid, eps, mode)?;
        cov.write_dump(&mut w)?;
    }
    w.flush()?;
    if let Some(path) = pgm {
        let leaf = grid.with_level(level_for_bound(&grid, eps)?);
        let mut canvas = Canvas::new(leaf, CellId::ROOT)?;
        for r in &ds.regions {
            canvas = blend(&canvas, &render_region(r, &leaf, CellId::ROOT, mode)?, BlendFn::Overwrite)?;
        }
        let mut f = BufWriter::new(File::create(path)?);
        canvas.write_pgm(&mut f, Channel::Boundary)?;
        f.flush()?;
    }
    Ok(())
}

fn sidecar(index: &Path) -> std::path::PathBuf {
    let mut s = index.as_os_str().to_owned();
    s.push(".norm.json");
    s.into()
}

pub struct IndexBuild {
    pub epsilon: Option<f64>,
    pub level: Option<u8>,
    pub sums: Vec<String>,
    pub filter: Option<AttrFilter>,
    pub radix_bits: u8,
    pub max_error: u32,
}

/// Sorted point index plus spline, and the normalizer next to it.
pub fn cmd_index_build(inputs: &Inputs, b: &IndexBuild, out: &Path) -> Result<()> {
    let ds = ingest(inputs, None)?;
    let unit = GridConfig::<f64>::unit(0)?;
    let level = match (b.level, b.epsilon) {
        (Some(l), _) => l,
        (None, Some(e)) => level_for_bound(&unit, ds.norm.scale(e))?,
        (None, None) => bail!("give --epsilon or --level"),
    };
    let sums: Vec<&str> = b.sums.iter().map(String::as_str).collect();
    let lps = lps_build_filtered(&ds.points, &unit.with_level(level), &sums, b.filter.as_ref())?;
    let rs = rs_build(&lps, b.radix_bits.min((2 * level).max(1)), b.max_error)?;
    let mut f = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    lps.write_to(&mut f, Some(&rs))?;
    f.flush()?;
    ds.norm.save(&sidecar(out))?;
    log::info!("indexed {} points at level {level}, {} knots", lps.len(), rs.knots().len());
    Ok(())
}

pub fn load_index(path: &Path) -> Result<(LinearizedPointSet<f64>, Option<RadixSplineIndex>, Normalizer)> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let (lps, rs) = LinearizedPointSet::<f64>::read_from(&mut f)?;
    let norm = Normalizer::load(&sidecar(path))?;
    Ok((lps, rs, norm))
}

/// Join regions against a saved point index.
pub fn cmd_query(index: &Path, regions: &Path, spec: &QuerySpec, out: Option<&Path>) -> Result<()> {
    let (lps, rs, norm) = load_index(index)?;
    let inputs = Inputs { regions: Some(regions.into()), ..Default::default() };
    let ds = ingest(&inputs, Some(norm))?;
    let mut w = open_out(out)?;
    for &eps in &spec.epsilons {
        let q = spec.query(norm.scale(eps))?;
        for r in join_pointindex(&lps, rs.as_ref(), &ds.regions, &q, &spec.opts)? {
            write_json(&mut w, &ResultLine::new(&r, spec, eps, Engine::PointIndex))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A built engine, ready to answer the query it was built for.
enum Built {
    Act(AdaptiveCellTrie<f64>),
    PointIndex(LinearizedPointSet<f64>, RadixSplineIndex),
    Canvas,
}

impl Built {
    fn memory_bytes(&self, q: &AggregationQuery<f64>, opts: &JoinOptions) -> usize {
        match self {
            Built::Act(t) => t.memory_bytes(),
            Built::PointIndex(lps, rs) => {
                lps.len() * 12 + lps.sum_columns().iter().map(|c| c.prefix.len() * 8).sum::<usize>() + rs.memory_bytes()
            }
            Built::Canvas => {
                let level = level_for_bound(&GridConfig::<f64>::unit(0).unwrap(), q.epsilon).unwrap_or(0);
                let side = 1usize << level.min(opts.canvas_log2);
                // Point canvas plus the region canvas and blend result.
                3 * side * side * std::mem::size_of::<Option<epsraster::canvas::Pixel>>()
            }
        }
    }
}

fn build(engine: Engine, ds: &Dataset, q: &AggregationQuery<f64>, opts: &JoinOptions) -> Result<Built> {
    let unit = GridConfig::<f64>::unit(0)?;
    Ok(match engine {
        Engine::Act => Built::Act(build_act(&ds.regions, &unit, q, opts)?),
        Engine::PointIndex => {
            let level = level_for_bound(&unit, q.epsilon)?;
            let sums: Vec<&str> = q.agg.attr().into_iter().collect();
            let lps = lps_build_filtered(&ds.points, &unit.with_level(level), &sums, q.filter.as_ref())?;
            let rs = rs_build(
                &lps,
                epsraster::pointindex::DEFAULT_RADIX_BITS.min((2 * level).max(1)),
                epsraster::pointindex::DEFAULT_MAX_ERROR,
            )?;
            Built::PointIndex(lps, rs)
        }
        Engine::Canvas => Built::Canvas,
    })
}

fn run(built: &Built, ds: &Dataset, q: &AggregationQuery<f64>, opts: &JoinOptions) -> Result<Vec<RegionResult>> {
    let unit = GridConfig::<f64>::unit(0)?;
    Ok(match built {
        Built::Act(t) => join_act_indexed(t, &ds.points, &ds.regions, q, opts)?,
        Built::PointIndex(lps, rs) => join_pointindex(lps, Some(rs), &ds.regions, q, opts)?,
        Built::Canvas => join_canvas(&ds.points, &ds.regions, &unit, q, opts)?,
    })
}

pub fn cmd_join(inputs: &Inputs, spec: &QuerySpec, engines: &[Engine], out: Option<&Path>) -> Result<()> {
    let ds = ingest(inputs, None)?;
    if ds.regions.is_empty() || inputs.points.is_none() {
        bail!("join needs --points and --regions");
    }
    let mut w = open_out(out)?;
    for &eps in &spec.epsilons {
        let q = spec.query(ds.norm.scale(eps))?;
        for &e in engines {
            let built = build(e, &ds, &q, &spec.opts)?;
            for r in run(&built, &ds, &q, &spec.opts)? {
                write_json(&mut w, &ResultLine::new(&r, spec, eps, e))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Exact answer per region by point-in-polygon tests.
pub fn oracle(ds: &Dataset, agg: &Aggregate, filter: Option<&AttrFilter>) -> Result<Vec<Option<f64>>> {
    let col = agg.attr().map(|a| ds.points.attr_index(a)).transpose()?;
    let filter = filter.map(|f| f.bind(&ds.points)).transpose()?;
    Ok(ds
        .regions
        .iter()
        .map(|r| {
            let mut acc = epsraster::Partial::default();
            for p in ds.points.records() {
                if filter.as_ref().is_none_or(|f| f.matches(p)) && r.contains(&p.loc) {
                    acc.add(col.map_or(0.0, |k| p.attrs[k]));
                }
            }
            acc.finalize(agg)
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct BenchRegion {
    region_id: u64,
    alpha: Option<f64>,
    beta: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    exact: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BenchRecord {
    engine: &'static str,
    epsilon: f64,
    mode: &'static str,
    agg: String,
    level: u8,
    points: usize,
    build_ms: Option<f64>,
    query_ms: Option<f64>,
    index_bytes: usize,
    median_rel_error: Option<f64>,
    mean_rel_error: Option<f64>,
    max_abs_error: Option<f64>,
    range_violations: usize,
    regions: Vec<BenchRegion>,
}

#[derive(Debug, Serialize)]
struct BenchFailure {
    engine: &'static str,
    epsilon: f64,
    error: String,
}

pub struct BenchSpec {
    pub seed: u64,
    pub n_points: usize,
    pub n_regions: usize,
    pub timings: bool,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn synthetic(b: &BenchSpec) -> Dataset {
    let (points, regions) = epsraster::synth::workload(b.seed, b.n_points, b.n_regions);
    Dataset { points, regions, norm: Normalizer::identity(), rejects: Vec::new() }
}

pub fn cmd_bench(inputs: &Inputs, spec: &QuerySpec, engines: &[Engine], b: &BenchSpec, out: Option<&Path>) -> Result<()> {
    let ds = if inputs.points.is_none() && inputs.regions.is_none() {
        log::info!("no input files; generating seed {} workload", b.seed);
        synthetic(b)
    } else {
        ingest(inputs, None)?
    };
    let exact = oracle(&ds, &spec.agg, spec.filter.as_ref())?;
    let unit = GridConfig::<f64>::unit(0)?;
    let mut w = open_out(out)?;
    for &eps in &spec.epsilons {
        let q = spec.query(ds.norm.scale(eps))?;
        for &e in engines {
            let t0 = Instant::now();
            let attempt = build(e, &ds, &q, &spec.opts).and_then(|built| {
                let build_ms = t0.elapsed().as_secs_f64() * 1e3;
                let t1 = Instant::now();
                let res = run(&built, &ds, &q, &spec.opts)?;
                Ok((built, res, build_ms, t1.elapsed().as_secs_f64() * 1e3))
            });
            let (built, res, build_ms, query_ms) = match attempt {
                Ok(x) => x,
                Err(err) => {
                    log::warn!("{} at epsilon {eps}: {err:#}", e.name());
                    write_json(&mut w, &BenchFailure { engine: e.name(), epsilon: eps, error: format!("{err:#}") })?;
                    continue;
                }
            };
            let mut rel = Vec::new();
            let mut max_abs: Option<f64> = None;
            let mut violations = 0;
            let regions: Vec<BenchRegion> = res
                .iter()
                .zip(&exact)
                .map(|(r, &x)| {
                    if let (Some(a), Some(x)) = (r.alpha, x) {
                        let d = (a - x).abs();
                        max_abs = Some(max_abs.map_or(d, |m: f64| m.max(d)));
                        if x != 0.0 {
                            rel.push(d / x.abs());
                        }
                    }
                    if let (Some((lo, hi)), Some(x)) = (r.range, x) {
                        // Tolerate summation rounding on real-valued ranges.
                        let tol = 1e-9 * hi.abs().max(1.0);
                        if x < lo - tol || x > hi + tol {
                            violations += 1;
                        }
                    }
                    BenchRegion {
                        region_id: r.region_id,
                        alpha: r.alpha,
                        beta: r.beta,
                        lo: r.range.map(|v| v.0),
                        hi: r.range.map(|v| v.1),
                        exact: x,
                    }
                })
                .collect();
            let mean = (!rel.is_empty()).then(|| rel.iter().sum::<f64>() / rel.len() as f64);
            let rec = BenchRecord {
                engine: e.name(),
                epsilon: eps,
                mode: mode_name(spec.mode),
                agg: spec.agg.to_string(),
                level: level_for_bound(&unit, q.epsilon)?,
                points: ds.points.len(),
                build_ms: b.timings.then_some(build_ms),
                query_ms: b.timings.then_some(query_ms),
                index_bytes: built.memory_bytes(&q, &spec.opts),
                median_rel_error: median(rel),
                mean_rel_error: mean,
                max_abs_error: max_abs,
                range_violations: violations,
                regions,
            };
            write_json(&mut w, &rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct AuditLine {
    region_id: u64,
    epsilon: f64,
    mode: &'static str,
    false_positives: u64,
    false_negatives: u64,
    /// Misclassified points farther than epsilon from the boundary.
    violations: u64,
    max_error_distance: f64,
}

#[derive(Debug, Serialize)]
struct IndexAudit {
    index: String,
    keys: usize,
    max_error: u64,
    violations: usize,
}

/// Distance-bound audit: every point the covering misclassifies must lie
/// within epsilon of the region boundary. Optionally also checks a saved
/// spline's error bound on every key.
pub fn cmd_audit(inputs: &Inputs, spec: &QuerySpec, index: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let ds = ingest(inputs, None)?;
    let unit = GridConfig::<f64>::unit(0)?;
    let mut w = open_out(out)?;
    let mut total_violations = 0;
    for &eps in &spec.epsilons {
        let e = ds.norm.scale(eps);
        for r in &ds.regions {
            let cov = rasterize_region(r, &unit, e, spec.mode)?;
            let mut line = AuditLine {
                region_id: r.id,
                epsilon: eps,
                mode: mode_name(spec.mode),
                false_positives: 0,
                false_negatives: 0,
                violations: 0,
                max_error_distance: 0.0,
            };
            for p in ds.points.records() {
                let approx = cov.contains(&p.loc)?;
                let exact = r.contains(&p.loc);
                if approx == exact {
                    continue;
                }
                if approx {
                    line.false_positives += 1;
                } else {
                    line.false_negatives += 1;
                }
                let d = r.distance_to_boundary(&p.loc);
                line.max_error_distance = line.max_error_distance.max(d * ds.norm.extent);
                if d > e {
                    line.violations += 1;
                }
            }
            total_violations += line.violations;
            write_json(&mut w, &line)?;
        }
    }
    if let Some(path) = index {
        let (lps, rs, _) = load_index(path)?;
        let rs = rs.context("index file has no spline")?;
        let codes = lps.codes();
        let mut bad = 0;
        for (i, &k) in codes.iter().enumerate() {
            if (i == 0 || codes[i - 1] != k) && !rs.prediction_within(k, i as u64, rs.max_error()) {
                bad += 1;
            }
        }
        total_violations += bad as u64;
        write_json(
            &mut w,
            &IndexAudit { index: path.display().to_string(), keys: codes.len(), max_error: rs.max_error(), violations: bad },
        )?;
    }
    w.flush()?;
    if total_violations > 0 {
        bail!("audit found {total_violations} violations");
    }
    Ok(())
}

fn scalar_cell(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some(String::new()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// JSON lines to CSV. Records with a `regions` array become one row per
/// region, with the record's scalar fields repeated.
pub fn cmd_export_csv(input: &Path, out: Option<&Path>) -> Result<()> {
    let f = BufReader::new(File::open(input).with_context(|| format!("opening {}", input.display()))?);
    let mut rows: Vec<Map<String, Value>> = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).with_context(|| format!("{}: line {}", input.display(), n + 1))?;
        let Value::Object(obj) = v else {
            bail!("{}: line {} is not a JSON object", input.display(), n + 1);
        };
        match obj.get("regions") {
            Some(Value::Array(items)) => {
                for it in items {
                    let mut row = obj.clone();
                    row.remove("regions");
                    if let Value::Object(fields) = it {
                        row.extend(fields.clone());
                    }
                    rows.push(row);
                }
            }
            _ => rows.push(obj),
        }
    }
    let mut cols: Vec<String> = Vec::new();
    for r in &rows {
        for (k, v) in r {
            if scalar_cell(v).is_some() && !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    let w = open_out(out)?;
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(&cols)?;
    for r in &rows {
        cw.write_record(cols.iter().map(|c| r.get(c).and_then(scalar_cell).unwrap_or_default()))?;
    }
    cw.flush()?;
    Ok(())
}
