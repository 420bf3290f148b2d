//! Canvases: square pixel grids of aggregate payloads, plus the operators
//! that combine them (blend, mask, affine) and a software rasterizer that
//! produces them.
//!
//! Pixel `(ix, iy)` of a canvas at level `L` is the leaf cell
//! `z_encode(ix, iy, L)`. A canvas may also cover a single tile (a coarser
//! cell) of the domain, in which case pixel indexes are relative to the
//! tile's lower-left leaf.

use crate::aggregate::{AttrFilter, Partial};
use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, segment_crosses_open_rect, PointDataset, Point2D, Polygon, RegionRecord};
use crate::grid::{z_decode, z_encode, CellId, GridConfig};
use crate::raster::{check_inside_domain, RasterMode};
use crate::scalar::Scalar;
use std::io::Write;

/// Largest canvas side, as a power of two.
pub const MAX_CANVAS_LOG2: u8 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pixel {
    pub count: u64,
    pub sum: f64,
    pub region_id: Option<u64>,
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendFn {
    /// Add counts and sums; flags are or-ed.
    Sum,
    /// Right operand wins where present.
    Overwrite,
    /// Channel-wise maximum.
    Max,
    /// Region union: like `Sum`, but a pixel stays a boundary pixel only if
    /// it is one in every operand that has it.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskPredicate {
    Always,
    NonEmpty,
    RegionEq(u64),
    BoundaryOnly,
    InteriorOnly,
    CountGt(u64),
}

impl MaskPredicate {
    #[inline]
    pub fn test(&self, p: &Pixel) -> bool {
        match *self {
            MaskPredicate::Always | MaskPredicate::NonEmpty => true,
            MaskPredicate::RegionEq(id) => p.region_id == Some(id),
            MaskPredicate::BoundaryOnly => p.boundary,
            MaskPredicate::InteriorOnly => !p.boundary,
            MaskPredicate::CountGt(n) => p.count > n,
        }
    }
}

/// `(ix, iy) -> (a*ix + b*iy + tx, c*ix + d*iy + ty)` in pixel indexes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0, tx: 0.0, ty: 0.0 }
    }

    pub fn translate(dx: f64, dy: f64) -> Self {
        Self { tx: dx, ty: dy, ..Self::identity() }
    }

    /// Mirror columns of a canvas `width` pixels wide.
    pub fn flip_x(width: usize) -> Self {
        Self { a: -1.0, tx: width as f64 - 1.0, ..Self::identity() }
    }

    /// Mirror rows of a canvas `height` pixels high.
    pub fn flip_y(height: usize) -> Self {
        Self { d: -1.0, ty: height as f64 - 1.0, ..Self::identity() }
    }

    /// Integer form, if the transform maps pixels onto pixels.
    fn exact(&self) -> Option<[i64; 6]> {
        let unit = |v: f64| v == 0.0 || v == 1.0 || v == -1.0;
        let int = |v: f64| v.is_finite() && v.fract() == 0.0 && v.abs() < (1u64 << 40) as f64;
        let m = [self.a, self.b, self.c, self.d];
        if !m.iter().all(|&v| unit(v)) || !int(self.tx) || !int(self.ty) {
            return None;
        }
        // Signed permutation: exactly one non-zero per row and column.
        let row_ok = (self.a != 0.0) != (self.b != 0.0) && (self.c != 0.0) != (self.d != 0.0);
        let col_ok = (self.a != 0.0) != (self.c != 0.0);
        if !row_ok || !col_ok {
            return None;
        }
        Some([self.a as i64, self.b as i64, self.c as i64, self.d as i64, self.tx as i64, self.ty as i64])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Count,
    Sum,
    Region,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Canvas<T> {
    grid: GridConfig<T>,
    tile: CellId,
    side: usize,
    pixels: Vec<Option<Pixel>>,
}

impl<T: Scalar> Canvas<T> {
    /// Empty canvas over `tile` at the grid's leaf level.
    pub fn new(grid: GridConfig<T>, tile: CellId) -> Result<Self> {
        if tile.level > grid.max_level {
            return Err(Error::Config(format!(
                "tile level {} is below the leaf level {}",
                tile.level, grid.max_level
            )));
        }
        let log2 = grid.max_level - tile.level;
        if log2 > MAX_CANVAS_LOG2 {
            return Err(Error::Capacity(format!(
                "canvas side 2^{log2} exceeds 2^{MAX_CANVAS_LOG2}; tile the domain"
            )));
        }
        let side = 1usize << log2;
        Ok(Self { grid, tile, side, pixels: vec![None; side * side] })
    }

    /// Canvas from row-major pixels (`iy * side + ix`).
    pub fn from_pixels(grid: GridConfig<T>, tile: CellId, pixels: Vec<Option<Pixel>>) -> Result<Self> {
        let mut c = Self::new(grid, tile)?;
        if pixels.len() != c.pixels.len() {
            return Err(Error::Shape(format!("{} pixels for a {s}x{s} canvas", pixels.len(), s = c.side)));
        }
        c.pixels = pixels;
        Ok(c)
    }

    pub fn grid(&self) -> &GridConfig<T> {
        &self.grid
    }

    pub fn tile(&self) -> CellId {
        self.tile
    }

    pub fn width(&self) -> usize {
        self.side
    }

    pub fn height(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[Option<Pixel>] {
        &self.pixels
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<&Pixel> {
        if ix < self.side && iy < self.side {
            self.pixels[iy * self.side + ix].as_ref()
        } else {
            None
        }
    }

    pub fn num_set(&self) -> usize {
        self.pixels.iter().filter(|p| p.is_some()).count()
    }

    /// Global leaf column/row of the tile's first pixel.
    fn offset(&self) -> (u64, u64) {
        let (tx, ty) = z_decode(self.tile.code);
        (tx as u64 * self.side as u64, ty as u64 * self.side as u64)
    }

    /// Leaf cell of pixel `(ix, iy)`.
    pub fn leaf_cell(&self, ix: usize, iy: usize) -> CellId {
        let (ox, oy) = self.offset();
        z_encode((ox + ix as u64) as u32, (oy + iy as u64) as u32, self.grid.max_level)
            .expect("pixel inside the canvas")
    }

    /// Pixel containing `p`, or `None` if `p` is outside this tile.
    /// Fails for points outside the grid domain.
    pub fn pixel_of(&self, p: &Point2D<T>) -> Result<Option<(usize, usize)>> {
        let (gx, gy) = self
            .grid
            .cell_coords(p, self.grid.max_level)
            .ok_or_else(|| Error::Domain(format!("point {p:?} outside the grid domain")))?;
        let (ox, oy) = self.offset();
        let (gx, gy) = (gx as u64, gy as u64);
        let s = self.side as u64;
        if gx < ox || gy < oy || gx >= ox + s || gy >= oy + s {
            return Ok(None);
        }
        Ok(Some(((gx - ox) as usize, (gy - oy) as usize)))
    }

    /// Set pixels with their leaf cells, row-major.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize, &Pixel)> + '_ {
        let s = self.side;
        self.pixels.iter().enumerate().filter_map(move |(i, p)| p.as_ref().map(|p| (i % s, i / s, p)))
    }

    /// COUNT and SUM over all set pixels, in row-major order.
    pub fn reduce(&self) -> Partial {
        let mut acc = Partial::default();
        for p in self.pixels.iter().flatten() {
            acc.count += p.count;
            acc.sum += p.sum;
        }
        acc
    }

    /// Export one channel as a grid of values, top row first. Empty pixels
    /// are written as empty fields.
    pub fn write_csv<W: Write>(&self, w: &mut W, ch: Channel) -> std::io::Result<()> {
        for iy in (0..self.side).rev() {
            let row = &self.pixels[iy * self.side..(iy + 1) * self.side];
            let fields: Vec<String> =
                row.iter().map(|p| p.map(|p| channel_value(&p, ch).to_string()).unwrap_or_default()).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Export one channel as an ASCII PGM, scaled to 0..=255, top row first.
    pub fn write_pgm<W: Write>(&self, w: &mut W, ch: Channel) -> std::io::Result<()> {
        let vals: Vec<f64> =
            self.pixels.iter().map(|p| p.map(|p| channel_value(&p, ch)).unwrap_or(0.0).max(0.0)).collect();
        let max = vals.iter().copied().fold(0.0, f64::max);
        writeln!(w, "P2\n{} {}\n255", self.side, self.side)?;
        for iy in (0..self.side).rev() {
            let row: Vec<String> = vals[iy * self.side..(iy + 1) * self.side]
                .iter()
                .map(|&v| if max > 0.0 { ((v / max) * 255.0).round() as u32 } else { 0 }.to_string())
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn channel_value(p: &Pixel, ch: Channel) -> f64 {
    match ch {
        Channel::Count => p.count as f64,
        Channel::Sum => p.sum,
        Channel::Region => p.region_id.map(|v| v as f64).unwrap_or(-1.0),
        Channel::Boundary => p.boundary as u8 as f64,
    }
}

fn combine(a: &Pixel, b: &Pixel, f: BlendFn) -> Pixel {
    match f {
        BlendFn::Sum => Pixel {
            count: a.count + b.count,
            sum: a.sum + b.sum,
            region_id: a.region_id.or(b.region_id),
            boundary: a.boundary || b.boundary,
        },
        BlendFn::Overwrite => *b,
        BlendFn::Max => Pixel {
            count: a.count.max(b.count),
            sum: a.sum.max(b.sum),
            region_id: a.region_id.max(b.region_id),
            boundary: a.boundary || b.boundary,
        },
        BlendFn::Union => Pixel {
            count: a.count + b.count,
            sum: a.sum + b.sum,
            region_id: a.region_id.or(b.region_id),
            boundary: a.boundary && b.boundary,
        },
    }
}

/// Pixel-wise `a ⊙ b`. An empty pixel is the identity of every blend.
pub fn blend<T: Scalar>(a: &Canvas<T>, b: &Canvas<T>, f: BlendFn) -> Result<Canvas<T>> {
    if a.side != b.side || a.tile != b.tile || !a.grid.same_domain(&b.grid) || a.grid.max_level != b.grid.max_level {
        return Err(Error::Shape(format!(
            "cannot blend a {0}x{0} canvas over {1:?} with a {2}x{2} canvas over {3:?}",
            a.side, a.tile, b.side, b.tile
        )));
    }
    let pixels = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(combine(x, y, f)),
            (Some(p), None) | (None, Some(p)) => Some(*p),
            (None, None) => None,
        })
        .collect();
    Ok(Canvas { pixels, ..a.clone_shape() })
}

/// Pixels failing `m` become empty.
pub fn mask<T: Scalar>(a: &Canvas<T>, m: MaskPredicate) -> Canvas<T> {
    let pixels = a.pixels.iter().map(|p| p.filter(|p| m.test(p))).collect();
    Canvas { pixels, ..a.clone_shape() }
}

/// Move pixels by a pixel-exact transform; pixels landing outside drop.
pub fn affine<T: Scalar>(a: &Canvas<T>, t: &AffineTransform) -> Result<Canvas<T>> {
    let [ma, mb, mc, md, tx, ty] =
        t.exact().ok_or_else(|| Error::UnsupportedTransform(format!("{t:?} is not pixel-exact")))?;
    let s = a.side as i64;
    let mut out = a.clone_shape();
    for (ix, iy, p) in a.iter_set() {
        let (x, y) = (ix as i64, iy as i64);
        let nx = ma * x + mb * y + tx;
        let ny = mc * x + md * y + ty;
        if (0..s).contains(&nx) && (0..s).contains(&ny) {
            out.pixels[(ny * s + nx) as usize] = Some(*p);
        }
    }
    Ok(out)
}

impl<T: Scalar> Canvas<T> {
    fn clone_shape(&self) -> Canvas<T> {
        Canvas { grid: self.grid, tile: self.tile, side: self.side, pixels: vec![None; self.pixels.len()] }
    }
}

/// Tiles needed to cover the domain at leaf level `level` with canvases no
/// wider than `2^cap_log2`, in Z-order.
pub fn tiles_for(level: u8, cap_log2: u8) -> Vec<CellId> {
    let cap = cap_log2.min(MAX_CANVAS_LOG2);
    let tl = level.saturating_sub(cap);
    (0..1u64 << (2 * tl as u32)).map(|code| CellId { level: tl, code }).collect()
}

/// Accumulate points into leaf pixels. `sum_attr` selects the attribute for
/// the sum channel; points failing `filter` are skipped. Points outside the
/// domain are an error, points in the domain but outside the tile are ignored.
pub fn render_points<T: Scalar>(
    points: &PointDataset<T>,
    grid: &GridConfig<T>,
    tile: CellId,
    sum_attr: Option<&str>,
    filter: Option<&AttrFilter>,
) -> Result<Canvas<T>> {
    let mut c = Canvas::new(*grid, tile)?;
    let col = sum_attr.map(|a| points.attr_index(a)).transpose()?;
    let filter = filter.map(|f| f.bind(points)).transpose()?;
    for (i, r) in points.records().iter().enumerate() {
        if filter.as_ref().is_some_and(|f| !f.matches(r)) {
            continue;
        }
        let Some((ix, iy)) = c.pixel_of(&r.loc).map_err(|_| {
            Error::Domain(format!("point {i} at {:?} is outside the grid domain", r.loc))
        })?
        else {
            continue;
        };
        let px = c.pixels[iy * c.side + ix].get_or_insert_with(Pixel::default);
        px.count += 1;
        if let Some(k) = col {
            px.sum += r.attrs[k];
        }
    }
    Ok(c)
}

/// Rasterize one polygon into a canvas at the grid's leaf level.
///
/// The pixel set equals the leaf expansion of the uniform covering at the
/// same level and mode. Boundary pixels are found by walking each edge over
/// the rows it spans; the rest of each row is filled by crossing parity at
/// the row's center line.
pub fn render_polygon<T: Scalar>(
    poly: &Polygon<T>,
    grid: &GridConfig<T>,
    tile: CellId,
    mode: RasterMode,
    id: u64,
) -> Result<Canvas<T>> {
    check_inside_domain(grid, poly)?;
    let mut c = Canvas::new(*grid, tile)?;
    let s = c.side;
    let l = grid.max_level;
    let (ox, oy) = c.offset();
    let xs: Vec<T> = (0..=s as u64).map(|k| grid.line_x(ox + k, l)).collect();
    let ys: Vec<T> = (0..=s as u64).map(|k| grid.line_y(oy + k, l)).collect();
    let two = T::lit(2.0);
    let mbr = poly.mbr();
    if mbr.max.x < xs[0] || mbr.min.x > xs[s] || mbr.max.y < ys[0] || mbr.min.y > ys[s] {
        return Ok(c);
    }

    // Columns whose closed x-extent may meet [lo, hi], padded by one pixel.
    let col_range = |lo: T, hi: T| -> (usize, usize) {
        let c0 = xs[1..].partition_point(|&x| x < lo).saturating_sub(1);
        let c1 = (xs[..s].partition_point(|&x| x <= hi) + 1).min(s);
        (c0, c1)
    };
    let row_range = |lo: T, hi: T| -> (usize, usize) {
        let r0 = ys[1..].partition_point(|&y| y < lo).saturating_sub(1);
        let r1 = (ys[..s].partition_point(|&y| y <= hi) + 1).min(s);
        (r0, r1)
    };

    let mut boundary = vec![false; s * s];
    for (a, b) in poly.edges() {
        let (ylo, yhi) = (a.y.min(b.y), a.y.max(b.y));
        let (r0, r1) = row_range(ylo, yhi);
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        for r in r0..r1 {
            let (xlo, xhi) = if dy == T::zero() {
                (a.x.min(b.x), a.x.max(b.x))
            } else {
                let clamp = |t: T| t.max(T::zero()).min(T::one());
                let ta = clamp((ys[r] - a.y) / dy);
                let tb = clamp((ys[r + 1] - a.y) / dy);
                let (xa, xb) = (a.x + ta * dx, a.x + tb * dx);
                (xa.min(xb), xa.max(xb))
            };
            let (c0, c1) = col_range(xlo, xhi);
            for col in c0..c1 {
                let i = r * s + col;
                if !boundary[i]
                    && segment_crosses_open_rect(
                        &a,
                        &b,
                        &Point2D::new(xs[col], ys[r]),
                        &Point2D::new(xs[col + 1], ys[r + 1]),
                    )
                {
                    boundary[i] = true;
                }
            }
        }
    }

    let (r0, r1) = row_range(mbr.min.y, mbr.max.y);
    let (c0, c1) = col_range(mbr.min.x, mbr.max.x);
    let mut xings: Vec<T> = Vec::new();
    for r in r0..r1 {
        let yc = (ys[r] + ys[r + 1]) / two;
        // Same expression, operand order included, as the ray-casting test.
        xings.clear();
        for ring in poly.rings() {
            let n = ring.len();
            let mut j = n - 1;
            for i in 0..n {
                let (a, b) = (ring[i], ring[j]);
                if (a.y > yc) != (b.y > yc) {
                    xings.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
                }
                j = i;
            }
        }
        xings.sort_by(|p, q| p.partial_cmp(q).expect("finite coordinates"));
        let mut passed = 0;
        for col in c0..c1 {
            let xc = (xs[col] + xs[col + 1]) / two;
            while passed < xings.len() && xings[passed] <= xc {
                passed += 1;
            }
            let i = r * s + col;
            let center = Point2D::new(xc, yc);
            let px = if boundary[i] {
                let keep = match mode {
                    RasterMode::Conservative => true,
                    RasterMode::CenterSampled => point_in_polygon(&center, poly),
                };
                keep.then_some(Pixel { region_id: Some(id), boundary: true, ..Pixel::default() })
            } else {
                let inside = mbr.contains(&center) && (xings.len() - passed) % 2 == 1;
                inside.then_some(Pixel { region_id: Some(id), boundary: false, ..Pixel::default() })
            };
            c.pixels[i] = px;
        }
    }
    Ok(c)
}

/// Rasterize every polygon of a region and union them; interior wins over
/// boundary where polygons overlap.
pub fn render_region<T: Scalar>(
    region: &RegionRecord<T>,
    grid: &GridConfig<T>,
    tile: CellId,
    mode: RasterMode,
) -> Result<Canvas<T>> {
    let mut out: Option<Canvas<T>> = None;
    for g in &region.polygons {
        let c = render_polygon(g, grid, tile, mode, region.id)?;
        out = Some(match out {
            None => c,
            Some(acc) => blend(&acc, &c, BlendFn::Union)?,
        });
    }
    match out {
        Some(c) => Ok(c),
        None => Canvas::new(*grid, tile),
    }
}
