//! Approximate spatial aggregation: for every region, aggregate the points
//! that fall in its raster covering. Three engines compute the same answer:
//!
//! - [`join_act`] probes a trie of all region coverings once per point;
//! - [`join_pointindex`] turns each covering into code intervals over a
//!   sorted point array and answers them with prefix sums;
//! - [`join_canvas`] renders points and regions to canvases and combines
//!   them with blend/mask/reduce.
//!
//! Each result carries `alpha`, the aggregate over the whole covering, and
//! `beta`, the part contributed by boundary cells. Points in interior cells
//! are certainly inside the region, so in conservative mode the exact COUNT
//! (or SUM of non-negative values) lies in `[alpha - beta, alpha]`.

use crate::act::{act_build, AdaptiveCellTrie};
use crate::aggregate::{Aggregate, AttrFilter, Partial};
use crate::canvas::{blend, mask, render_points, render_region, tiles_for, BlendFn, MaskPredicate, MAX_CANVAS_LOG2};
use crate::error::{Error, Result};
use crate::geometry::{PointDataset, RegionRecord};
use crate::grid::{level_for_bound, CellInterval, GridConfig};
use crate::pointindex::{range_partial, LinearizedPointSet, RadixSplineIndex};
use crate::raster::{rasterize_region, CellKind, RasterApprox, RasterMode};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::collections::HashMap;

/// Points per chunk in the trie join; fixed so sums do not depend on the
/// thread count.
const CHUNK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationQuery<T> {
    pub agg: Aggregate,
    pub epsilon: T,
    pub mode: RasterMode,
    pub filter: Option<AttrFilter>,
}

impl<T: Scalar> AggregationQuery<T> {
    pub fn new(agg: Aggregate, epsilon: T, mode: RasterMode) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon.is_finite()) {
            return Err(Error::Config(format!("distance bound must be positive, got {epsilon}")));
        }
        Ok(Self { agg, epsilon, mode, filter: None })
    }

    pub fn with_filter(mut self, filter: Option<AttrFilter>) -> Self {
        self.filter = filter;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    pub region_id: u64,
    /// COUNT/SUM over all covering cells.
    pub alpha_part: Partial,
    /// COUNT/SUM over boundary cells only.
    pub beta_part: Partial,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// `[lo, hi]` guaranteed to hold the exact answer, when derivable.
    pub range: Option<(f64, f64)>,
    /// Every aggregated value was `>= 0` (always true for COUNT).
    pub nonnegative: bool,
}

impl RegionResult {
    fn new<T: Scalar>(region_id: u64, alpha_part: Partial, beta_part: Partial, nonneg: bool, q: &AggregationQuery<T>) -> Self {
        let mut r = RegionResult {
            region_id,
            alpha_part,
            beta_part,
            alpha: alpha_part.finalize(&q.agg),
            beta: beta_part.finalize(&q.agg),
            range: None,
            nonnegative: nonneg || q.agg == Aggregate::Count,
        };
        r.range = result_range(&r, q);
        r
    }
}

/// `[alpha - beta, alpha]` for conservative COUNT, or conservative SUM over
/// non-negative values; `None` for every other combination.
pub fn result_range<T: Scalar>(rr: &RegionResult, q: &AggregationQuery<T>) -> Option<(f64, f64)> {
    if q.mode != RasterMode::Conservative {
        return None;
    }
    match q.agg {
        Aggregate::Count => {
            let (a, b) = (rr.alpha_part.count, rr.beta_part.count);
            Some(((a - b) as f64, a as f64))
        }
        Aggregate::Sum(_) if rr.nonnegative => {
            let (a, b) = (rr.alpha_part.sum, rr.beta_part.sum);
            Some(((a - b).max(0.0), a))
        }
        _ => None,
    }
}

/// Execution knobs shared by the engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinOptions {
    pub parallel: bool,
    /// Radix width of the cell trie.
    pub radix_width: u8,
    /// Largest canvas side, as a power of two; finer grids are tiled.
    pub canvas_log2: u8,
}

impl Default for JoinOptions {
    fn default() -> Self {
        Self { parallel: false, radix_width: 8, canvas_log2: MAX_CANVAS_LOG2 }
    }
}

fn check_unique_ids<T>(regions: &[RegionRecord<T>]) -> Result<HashMap<u64, usize>> {
    let mut idx = HashMap::with_capacity(regions.len());
    for (i, r) in regions.iter().enumerate() {
        if idx.insert(r.id, i).is_some() {
            return Err(Error::Config(format!("duplicate region id {}", r.id)));
        }
    }
    Ok(idx)
}

/// Attribute column for the aggregate and whether all filtered values are
/// non-negative.
fn value_column<T: Scalar>(points: &PointDataset<T>, q: &AggregationQuery<T>) -> Result<(Option<usize>, bool)> {
    let col = q.agg.attr().map(|a| points.attr_index(a)).transpose()?;
    let filter = q.filter.as_ref().map(|f| f.bind(points)).transpose()?;
    let nonneg = match col {
        None => true,
        Some(k) => points
            .records()
            .iter()
            .filter(|r| filter.as_ref().is_none_or(|f| f.matches(r)))
            .all(|r| r.attrs[k] >= 0.0),
    };
    Ok((col, nonneg))
}

/// Coverings of all regions at the level chosen by the query's bound.
pub fn cover_regions<T: Scalar>(
    regions: &[RegionRecord<T>],
    grid: &GridConfig<T>,
    q: &AggregationQuery<T>,
    parallel: bool,
) -> Result<Vec<RasterApprox<T>>> {
    if parallel {
        regions.par_iter().map(|r| rasterize_region(r, grid, q.epsilon, q.mode)).collect()
    } else {
        regions.iter().map(|r| rasterize_region(r, grid, q.epsilon, q.mode)).collect()
    }
}

/// Index-nested-loop join over a trie of region coverings.
pub fn join_act<T: Scalar>(
    points: &PointDataset<T>,
    regions: &[RegionRecord<T>],
    grid: &GridConfig<T>,
    q: &AggregationQuery<T>,
    opts: &JoinOptions,
) -> Result<Vec<RegionResult>> {
    check_unique_ids(regions)?;
    if regions.is_empty() {
        return Ok(Vec::new());
    }
    let trie = build_act(regions, grid, q, opts)?;
    join_act_indexed(&trie, points, regions, q, opts)
}

/// Trie over the coverings of `regions` at the query's bound and mode.
pub fn build_act<T: Scalar>(
    regions: &[RegionRecord<T>],
    grid: &GridConfig<T>,
    q: &AggregationQuery<T>,
    opts: &JoinOptions,
) -> Result<AdaptiveCellTrie<T>> {
    let coverings = cover_regions(regions, grid, q, opts.parallel)?;
    act_build(&coverings, opts.radix_width)
}

/// Probe a prebuilt trie once per point. `trie` must hold the coverings of
/// exactly these regions.
pub fn join_act_indexed<T: Scalar>(
    trie: &AdaptiveCellTrie<T>,
    points: &PointDataset<T>,
    regions: &[RegionRecord<T>],
    q: &AggregationQuery<T>,
    opts: &JoinOptions,
) -> Result<Vec<RegionResult>> {
    let idx = check_unique_ids(regions)?;
    let leaf = *trie.grid();
    if level_for_bound(&leaf, q.epsilon)? != leaf.max_level {
        return Err(Error::Config(format!(
            "trie level {} does not match the bound {}",
            leaf.max_level, q.epsilon
        )));
    }
    let (col, nonneg) = value_column(points, q)?;
    let filter = q.filter.as_ref().map(|f| f.bind(points)).transpose()?;
    let recs = points.records();

    let scan = |start: usize| -> Result<Vec<(Partial, Partial)>> {
        let mut acc = vec![(Partial::default(), Partial::default()); regions.len()];
        let end = (start + CHUNK).min(recs.len());
        for (i, r) in recs[start..end].iter().enumerate() {
            if filter.as_ref().is_some_and(|f| !f.matches(r)) {
                continue;
            }
            let code = leaf.leaf_code(&r.loc).map_err(|_| {
                Error::Domain(format!("point {} at {:?} is outside the grid domain", start + i, r.loc))
            })?;
            let v = col.map_or(0.0, |k| r.attrs[k]);
            let mut err = None;
            trie.for_each_hit(code, |h| match idx.get(&h.region_id) {
                Some(&j) => {
                    let a = &mut acc[j];
                    a.0.add(v);
                    if h.kind == CellKind::Boundary {
                        a.1.add(v);
                    }
                }
                None => err = Some(h.region_id),
            });
            if let Some(id) = err {
                return Err(Error::Config(format!("trie holds unknown region {id}")));
            }
        }
        Ok(acc)
    };
    let starts: Vec<usize> = (0..recs.len()).step_by(CHUNK).collect();
    let chunks: Vec<Vec<(Partial, Partial)>> = if opts.parallel {
        starts.par_iter().map(|&s| scan(s)).collect::<Result<_>>()?
    } else {
        starts.iter().map(|&s| scan(s)).collect::<Result<_>>()?
    };
    let mut total = vec![(Partial::default(), Partial::default()); regions.len()];
    for c in &chunks {
        for (t, x) in total.iter_mut().zip(c) {
            t.0.merge(&x.0);
            t.1.merge(&x.1);
        }
    }
    Ok(regions
        .iter()
        .zip(total)
        .map(|(r, (a, b))| RegionResult::new(r.id, a, b, nonneg, q))
        .collect())
}

/// Merge touching intervals.
fn coalesce(ivs: impl Iterator<Item = CellInterval>) -> Vec<CellInterval> {
    let mut out: Vec<CellInterval> = Vec::new();
    for iv in ivs {
        match out.last_mut() {
            Some(last) if last.hi == iv.lo => last.hi = iv.hi,
            _ => out.push(iv),
        }
    }
    out
}

/// Join through a sorted point array: each covering becomes a list of code
/// intervals answered with two bound lookups and prefix sums.
///
/// The point set may be linearized at a finer level than the query needs;
/// it must be built with the query's filter.
pub fn join_pointindex<T: Scalar>(
    lps: &LinearizedPointSet<T>,
    rs: Option<&RadixSplineIndex>,
    regions: &[RegionRecord<T>],
    q: &AggregationQuery<T>,
    opts: &JoinOptions,
) -> Result<Vec<RegionResult>> {
    check_unique_ids(regions)?;
    if lps.filter() != q.filter.as_ref() {
        return Err(Error::Config(format!(
            "point index was built with filter {:?}, query uses {:?}",
            lps.filter().map(|f| f.to_string()),
            q.filter.as_ref().map(|f| f.to_string())
        )));
    }
    let pgrid = lps.grid();
    let level = level_for_bound(pgrid, q.epsilon)?;
    if level > pgrid.max_level {
        return Err(Error::Config(format!(
            "point index level {} is coarser than the level {level} the bound needs",
            pgrid.max_level
        )));
    }
    let col = q.agg.attr().map(|a| lps.sum_column(a)).transpose()?;
    let nonneg = col.is_none_or(|c| c.nonnegative);
    let pl = pgrid.max_level;
    let one = |r: &RegionRecord<T>| -> Result<RegionResult> {
        let cov = rasterize_region(r, pgrid, q.epsilon, q.mode)?;
        let all = coalesce(cov.cells().iter().map(|c| c.cell.interval(pl)));
        let bnd = coalesce(cov.boundary().map(|c| c.interval(pl)));
        let a = range_partial(lps, rs, &all, col);
        let b = range_partial(lps, rs, &bnd, col);
        Ok(RegionResult::new(r.id, a, b, nonneg, q))
    };
    if opts.parallel {
        regions.par_iter().map(one).collect()
    } else {
        regions.iter().map(one).collect()
    }
}

/// Bounded raster join: render the points once per tile, then for every
/// region render its covering, blend it over the point canvas, keep the
/// region's pixels and reduce them. Boundary pixels are reduced separately.
pub fn join_canvas<T: Scalar>(
    points: &PointDataset<T>,
    regions: &[RegionRecord<T>],
    grid: &GridConfig<T>,
    q: &AggregationQuery<T>,
    opts: &JoinOptions,
) -> Result<Vec<RegionResult>> {
    check_unique_ids(regions)?;
    let (_, nonneg) = value_column(points, q)?;
    let leaf = grid.with_level(level_for_bound(grid, q.epsilon)?);
    let mut acc = vec![(Partial::default(), Partial::default()); regions.len()];
    for tile in tiles_for(leaf.max_level, opts.canvas_log2) {
        let pc = render_points(points, &leaf, tile, q.agg.attr(), q.filter.as_ref())?;
        if pc.num_set() == 0 {
            continue;
        }
        let (tlo, thi) = leaf.cell_bounds(tile);
        let one = |r: &RegionRecord<T>| -> Result<(Partial, Partial)> {
            let m = r.mbr();
            if m.max.x < tlo.x || m.min.x > thi.x || m.max.y < tlo.y || m.min.y > thi.y {
                return Ok((Partial::default(), Partial::default()));
            }
            let rc = render_region(r, &leaf, tile, q.mode)?;
            let joined = blend(&pc, &rc, BlendFn::Sum)?;
            let inside = mask(&joined, MaskPredicate::RegionEq(r.id));
            let border = mask(&inside, MaskPredicate::BoundaryOnly);
            Ok((inside.reduce(), border.reduce()))
        };
        let parts: Vec<(Partial, Partial)> = if opts.parallel {
            regions.par_iter().map(one).collect::<Result<_>>()?
        } else {
            regions.iter().map(one).collect::<Result<_>>()?
        };
        for (t, x) in acc.iter_mut().zip(&parts) {
            t.0.merge(&x.0);
            t.1.merge(&x.1);
        }
    }
    Ok(regions
        .iter()
        .zip(acc)
        .map(|(r, (a, b))| RegionResult::new(r.id, a, b, nonneg, q))
        .collect())
}
