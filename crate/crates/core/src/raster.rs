//! Distance-bounded raster approximation of polygons.
//!
//! A covering is built by quadtree descent from the root cell. A cell whose
//! open interior is crossed by no polygon edge is entirely inside or entirely
//! outside the polygon; inside cells are emitted as interior cells at whatever
//! level they were found, outside cells are dropped. Crossed cells are split
//! until the leaf level, where they become boundary cells. The leaf level is
//! chosen so a leaf diagonal is at most the distance bound, which bounds the
//! Hausdorff distance between the polygon and its covering.

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, segment_crosses_open_rect, Point2D, Polygon, RegionRecord};
use crate::grid::{level_for_bound, CellId, CellInterval, GridConfig};
use crate::scalar::Scalar;
use std::fmt;
use std::io::Write;

/// Largest number of cells a uniform covering may expand to.
pub const MAX_UNIFORM_CELLS: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RasterMode {
    /// Keep every boundary cell: only false positives, all within the bound.
    Conservative,
    /// Keep a boundary cell iff its center is inside the polygon.
    CenterSampled,
}

impl fmt::Display for RasterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RasterMode::Conservative => "conservative",
            RasterMode::CenterSampled => "center",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Interior,
    Boundary,
}

impl CellKind {
    pub fn as_char(&self) -> char {
        match self {
            CellKind::Interior => 'I',
            CellKind::Boundary => 'B',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Inside,
    Outside,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoverCell {
    pub cell: CellId,
    pub kind: CellKind,
}

/// A polygon (or multi-polygon region) approximated by disjoint grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterApprox<T> {
    region_id: u64,
    epsilon: T,
    mode: RasterMode,
    grid: GridConfig<T>,
    /// Sorted by leaf interval, pairwise disjoint.
    cells: Vec<CoverCell>,
}

/// Classify a cell's square against a polygon.
pub fn classify_cell<T: Scalar>(grid: &GridConfig<T>, c: CellId, poly: &Polygon<T>) -> CellClass {
    let (lo, hi) = grid.cell_bounds(c);
    if poly.edges().any(|(a, b)| segment_crosses_open_rect(&a, &b, &lo, &hi)) {
        CellClass::Partial
    } else if point_in_polygon(&grid.cell_center(c), poly) {
        CellClass::Inside
    } else {
        CellClass::Outside
    }
}

pub(crate) fn check_inside_domain<T: Scalar>(grid: &GridConfig<T>, poly: &Polygon<T>) -> Result<()> {
    let d = grid.domain_mbr();
    let m = poly.mbr();
    if d.contains(&m.min) && d.contains(&m.max) {
        Ok(())
    } else {
        Err(Error::Domain(format!("polygon {m:?} is not inside the grid domain {d:?}")))
    }
}

/// Hierarchical covering of one polygon at `grid.max_level`, in quadtree
/// (Z-order) sequence.
pub(crate) fn cover_polygon<T: Scalar>(
    grid: &GridConfig<T>,
    poly: &Polygon<T>,
    mode: RasterMode,
) -> Result<Vec<CoverCell>> {
    check_inside_domain(grid, poly)?;
    let edges: Vec<(Point2D<T>, Point2D<T>)> = poly.edges().collect();
    let mut out = Vec::new();
    descend(grid, poly, mode, CellId::ROOT, &edges, &mut out);
    Ok(out)
}

fn descend<T: Scalar>(
    grid: &GridConfig<T>,
    poly: &Polygon<T>,
    mode: RasterMode,
    cell: CellId,
    edges: &[(Point2D<T>, Point2D<T>)],
    out: &mut Vec<CoverCell>,
) {
    let (lo, hi) = grid.cell_bounds(cell);
    // Edges crossing a child also cross its parent, so the list only shrinks.
    let crossing: Vec<_> =
        edges.iter().copied().filter(|(a, b)| segment_crosses_open_rect(a, b, &lo, &hi)).collect();
    if crossing.is_empty() {
        if point_in_polygon(&grid.cell_center(cell), poly) {
            out.push(CoverCell { cell, kind: CellKind::Interior });
        }
        return;
    }
    if cell.level >= grid.max_level {
        let keep = match mode {
            RasterMode::Conservative => true,
            RasterMode::CenterSampled => point_in_polygon(&grid.cell_center(cell), poly),
        };
        if keep {
            out.push(CoverCell { cell, kind: CellKind::Boundary });
        }
        return;
    }
    for child in cell.children().expect("level below grid maximum") {
        descend(grid, poly, mode, child, &crossing, out);
    }
}

/// Union of coverings: nested cells collapse into the coarser one, and an
/// interior cell wins over an identical boundary cell.
fn union_cells(mut cells: Vec<CoverCell>, max_level: u8) -> Vec<CoverCell> {
    cells.sort_by_key(|c| (c.cell.interval(max_level).lo, c.cell.level, c.kind));
    let mut out: Vec<CoverCell> = Vec::with_capacity(cells.len());
    let mut covered_to = 0u64;
    for c in cells {
        let iv = c.cell.interval(max_level);
        if !out.is_empty() && iv.lo < covered_to {
            continue;
        }
        covered_to = iv.hi;
        out.push(c);
    }
    out
}

fn expand_to_leaves(cells: &[CoverCell], max_level: u8) -> Result<Vec<CoverCell>> {
    let total: u64 = cells.iter().map(|c| c.cell.interval(max_level).len()).sum();
    if total > MAX_UNIFORM_CELLS {
        return Err(Error::Capacity(format!(
            "uniform covering needs {total} cells (limit {MAX_UNIFORM_CELLS})"
        )));
    }
    let mut out = Vec::with_capacity(total as usize);
    for c in cells {
        let iv = c.cell.interval(max_level);
        out.extend((iv.lo..iv.hi).map(|code| CoverCell {
            cell: CellId { level: max_level, code },
            kind: c.kind,
        }));
    }
    Ok(out)
}

pub fn rasterize_hierarchical<T: Scalar>(
    poly: &Polygon<T>,
    cfg: &GridConfig<T>,
    epsilon: T,
    mode: RasterMode,
) -> Result<RasterApprox<T>> {
    let grid = cfg.with_level(level_for_bound(cfg, epsilon)?);
    let cells = cover_polygon(&grid, poly, mode)?;
    Ok(RasterApprox { region_id: 0, epsilon, mode, grid, cells })
}

pub fn rasterize_uniform<T: Scalar>(
    poly: &Polygon<T>,
    cfg: &GridConfig<T>,
    epsilon: T,
    mode: RasterMode,
) -> Result<RasterApprox<T>> {
    let h = rasterize_hierarchical(poly, cfg, epsilon, mode)?;
    h.to_uniform()
}

/// Hierarchical covering of a whole region (union over its polygons).
pub fn rasterize_region<T: Scalar>(
    region: &RegionRecord<T>,
    cfg: &GridConfig<T>,
    epsilon: T,
    mode: RasterMode,
) -> Result<RasterApprox<T>> {
    let grid = cfg.with_level(level_for_bound(cfg, epsilon)?);
    let mut r = cover_region_at_level(region, &grid, mode)?;
    r.epsilon = epsilon;
    Ok(r)
}

/// Covering at the grid's own `max_level`; the stored bound is the leaf
/// diagonal.
pub fn cover_region_at_level<T: Scalar>(
    region: &RegionRecord<T>,
    grid: &GridConfig<T>,
    mode: RasterMode,
) -> Result<RasterApprox<T>> {
    let cells = if region.polygons.len() == 1 {
        cover_polygon(grid, &region.polygons[0], mode)?
    } else {
        let mut all = Vec::new();
        for g in &region.polygons {
            all.extend(cover_polygon(grid, g, mode)?);
        }
        union_cells(all, grid.max_level)
    };
    Ok(RasterApprox {
        region_id: region.id,
        epsilon: grid.leaf_diagonal(),
        mode,
        grid: *grid,
        cells,
    })
}

/// Point membership in the covering.
pub fn approx_contains<T: Scalar>(r: &RasterApprox<T>, p: &Point2D<T>) -> Result<bool> {
    Ok(r.lookup(p)?.is_some())
}

impl<T: Scalar> RasterApprox<T> {
    pub fn region_id(&self) -> u64 {
        self.region_id
    }

    pub fn with_region_id(mut self, id: u64) -> Self {
        self.region_id = id;
        self
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn mode(&self) -> RasterMode {
        self.mode
    }

    pub fn grid(&self) -> &GridConfig<T> {
        &self.grid
    }

    pub fn max_level(&self) -> u8 {
        self.grid.max_level
    }

    pub fn cells(&self) -> &[CoverCell] {
        &self.cells
    }

    pub fn interior(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.iter().filter(|c| c.kind == CellKind::Interior).map(|c| c.cell)
    }

    pub fn boundary(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.iter().filter(|c| c.kind == CellKind::Boundary).map(|c| c.cell)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Leaf-code intervals of all cells, in order, with their kind.
    pub fn intervals(&self) -> impl Iterator<Item = (CellInterval, CellKind)> + '_ {
        let l = self.grid.max_level;
        self.cells.iter().map(move |c| (c.cell.interval(l), c.kind))
    }

    /// Kind of the cell containing leaf code `code`, if any.
    pub fn lookup_code(&self, code: u64) -> Option<CellKind> {
        let l = self.grid.max_level;
        let i = self.cells.partition_point(|c| c.cell.interval(l).hi <= code);
        self.cells.get(i).filter(|c| c.cell.interval(l).contains(code)).map(|c| c.kind)
    }

    pub fn lookup(&self, p: &Point2D<T>) -> Result<Option<CellKind>> {
        Ok(self.lookup_code(self.grid.leaf_code(p)?))
    }

    pub fn contains(&self, p: &Point2D<T>) -> Result<bool> {
        approx_contains(self, p)
    }

    /// Same region with every cell split down to the leaf level.
    pub fn to_uniform(&self) -> Result<Self> {
        Ok(Self { cells: expand_to_leaves(&self.cells, self.grid.max_level)?, ..self.clone() })
    }

    /// Leaf codes covered, with kinds (expands interior cells).
    pub fn leaf_cells(&self) -> Result<Vec<CoverCell>> {
        expand_to_leaves(&self.cells, self.grid.max_level)
    }

    /// One line per cell: `region_id level code I|B`.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for c in &self.cells {
            writeln!(w, "{} {} {} {}", self.region_id, c.cell.level, c.cell.code, c.kind.as_char())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance_to_boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;
    use std::f64::consts::SQRT_2;

    fn unit() -> GridConfig<f64> {
        GridConfig::unit(0).unwrap()
    }

    fn cell_set(it: impl Iterator<Item = CellId>) -> BTreeSet<(u8, u64)> {
        it.map(|c| (c.level, c.code)).collect()
    }

    #[test]
    fn classify_examples() {
        let g = unit();
        let inner = Polygon::rect(0.25, 0.25, 0.75, 0.75).unwrap();
        assert_eq!(classify_cell(&g, CellId::ROOT, &inner), CellClass::Partial);
        let sq = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(classify_cell(&g, CellId::new(2, 0).unwrap(), &sq), CellClass::Inside);
        let half = Polygon::rect(0.0, 0.0, 0.5, 0.5).unwrap();
        // [0.75,1) x [0,0.25): ix=3, iy=0 -> code 5
        let c = crate::grid::z_encode(3, 0, 2).unwrap();
        assert_eq!(classify_cell(&g, c, &half), CellClass::Outside);
    }

    #[test]
    fn domain_filling_polygon_is_root() {
        let sq = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        let r = rasterize_hierarchical(&sq, &unit(), 0.01, RasterMode::Conservative).unwrap();
        assert_eq!(cell_set(r.interior()), BTreeSet::from([(0, 0)]));
        assert_eq!(r.boundary().count(), 0);
    }

    #[test]
    fn centered_square_coarse_and_aligned() {
        let sq = Polygon::rect(0.25, 0.25, 0.75, 0.75).unwrap();
        let r = rasterize_hierarchical(&sq, &unit(), SQRT_2 / 2.0, RasterMode::Conservative).unwrap();
        assert_eq!(r.max_level(), 1);
        assert_eq!(r.interior().count(), 0);
        assert_eq!(cell_set(r.boundary()), BTreeSet::from([(1, 0), (1, 1), (1, 2), (1, 3)]));

        let r = rasterize_hierarchical(&sq, &unit(), SQRT_2 / 8.0, RasterMode::Conservative).unwrap();
        assert_eq!(r.max_level(), 3);
        assert_eq!(cell_set(r.interior()), BTreeSet::from([(2, 3), (2, 6), (2, 9), (2, 12)]));
        assert_eq!(r.boundary().count(), 0);
    }

    #[test]
    fn uniform_examples() {
        let sq = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        let r = rasterize_uniform(&sq, &unit(), SQRT_2 / 2.0, RasterMode::Conservative).unwrap();
        assert_eq!(cell_set(r.interior()), BTreeSet::from([(1, 0), (1, 1), (1, 2), (1, 3)]));

        let g2 = GridConfig::new(Point2D::new(0.0, 0.0), 2.0, 0).unwrap();
        let r = rasterize_uniform(&sq, &g2, SQRT_2, RasterMode::Conservative).unwrap();
        assert_eq!(r.max_level(), 1);
        assert_eq!(cell_set(r.interior()), BTreeSet::from([(1, 0)]));
        assert_eq!(r.boundary().count(), 0);
    }

    #[test]
    fn uniform_capacity_guard() {
        let sq = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        let r = rasterize_uniform(&sq, &unit(), 1e-7, RasterMode::Conservative);
        assert!(matches!(r, Err(Error::Capacity(_))));
    }

    #[test]
    fn polygon_outside_domain_rejected() {
        let sq = Polygon::rect(0.5, 0.5, 1.5, 0.9).unwrap();
        assert!(matches!(
            rasterize_hierarchical(&sq, &unit(), 0.1, RasterMode::Conservative),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn hierarchical_and_uniform_same_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..100 {
            let poly: Polygon<f64> = crate::synth::random_polygon(&mut rng, 0.05, 0.3, 10, i % 4 == 0);
            let eps = rng.gen_range(0.01..0.1);
            for mode in [RasterMode::Conservative, RasterMode::CenterSampled] {
                let h = rasterize_hierarchical(&poly, &unit(), eps, mode).unwrap();
                let u = rasterize_uniform(&poly, &unit(), eps, mode).unwrap();
                assert!(u.cells().iter().all(|c| c.cell.level == u.max_level()));
                assert_eq!(h.leaf_cells().unwrap(), u.cells().to_vec());
            }
        }
    }

    #[test]
    fn covering_cells_are_disjoint_and_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let poly: Polygon<f64> = crate::synth::random_polygon(&mut rng, 0.05, 0.3, 12, true);
            let eps = rng.gen_range(0.005..0.05);
            for mode in [RasterMode::Conservative, RasterMode::CenterSampled] {
                let r = rasterize_hierarchical(&poly, &unit(), eps, mode).unwrap();
                let ivs: Vec<_> = r.intervals().collect();
                for w in ivs.windows(2) {
                    assert!(w[0].0.hi <= w[1].0.lo);
                }
                for c in r.boundary() {
                    assert_eq!(c.level, r.max_level());
                    assert!(unit().with_level(c.level).leaf_diagonal() <= eps);
                }
                for _ in 0..2000 {
                    let q = Point2D::new(rng.gen(), rng.gen());
                    let exact = point_in_polygon(&q, &poly);
                    let approx = approx_contains(&r, &q).unwrap();
                    if approx != exact {
                        assert!(distance_to_boundary(&q, &poly) <= eps);
                    }
                    if mode == RasterMode::Conservative && exact {
                        assert!(approx);
                    }
                }
            }
        }
    }

    #[test]
    fn multi_polygon_union_keeps_coarser() {
        let g = unit();
        let a = Polygon::rect(0.0, 0.0, 0.5, 0.5).unwrap();
        let b = Polygon::rect(0.3, 0.3, 0.45, 0.45).unwrap();
        let c = Polygon::rect(0.6, 0.6, 0.9, 0.8).unwrap();
        let region = RegionRecord::multi(7, vec![a.clone(), b, c.clone()]).unwrap();
        let r = rasterize_region(&region, &g, 0.02, RasterMode::Conservative).unwrap();
        assert_eq!(r.region_id(), 7);
        assert!(r.interior().any(|x| x == CellId::new(1, 0).unwrap()));
        let ivs: Vec<_> = r.intervals().collect();
        for w in ivs.windows(2) {
            assert!(w[0].0.hi <= w[1].0.lo);
        }
        let ra = rasterize_hierarchical(&a, &g, 0.02, RasterMode::Conservative).unwrap();
        let rc = rasterize_hierarchical(&c, &g, 0.02, RasterMode::Conservative).unwrap();
        assert_eq!(r.cells().len(), ra.cells().len() + rc.cells().len());
    }

    #[test]
    fn dump_format() {
        let sq = Polygon::rect(0.25, 0.25, 0.75, 0.75).unwrap();
        let r = rasterize_hierarchical(&sq, &unit(), SQRT_2 / 2.0, RasterMode::Conservative)
            .unwrap()
            .with_region_id(4);
        let mut buf = Vec::new();
        r.write_dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "4 1 0 B\n4 1 1 B\n4 1 2 B\n4 1 3 B\n");
    }
}
