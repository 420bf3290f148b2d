//! The discrete cell universe: a quadtree over a square domain, linearized
//! with the Z-order (Morton) curve.
//!
//! Conventions:
//! - bit `i` of the column index `ix` sits at code bit `2i`, bit `i` of the
//!   row index `iy` at bit `2i + 1`;
//! - cells are half-open, `[x, x + side) x [y, y + side)`;
//! - the finest level is at most [`MAX_LEVEL`], so leaf codes fit in 62 bits.
//!
//! A cell at level `l` covers exactly the leaf codes
//! `[code * 4^(L-l), (code + 1) * 4^(L-l))` at level `L`, which is what lets
//! sorted-array and trie indexes treat cells as key ranges.

use crate::error::{Error, Result};
use crate::geometry::{Mbr, Point2D};
use crate::scalar::Scalar;

pub const MAX_LEVEL: u8 = 31;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig<T> {
    pub origin: Point2D<T>,
    pub extent: T,
    pub max_level: u8,
}

impl<T: Scalar> GridConfig<T> {
    pub fn new(origin: Point2D<T>, extent: T, max_level: u8) -> Result<Self> {
        if !(extent > T::zero() && extent.is_finite()) || !origin.is_finite() {
            return Err(Error::Config(format!("invalid domain origin={origin:?} extent={extent}")));
        }
        if max_level > MAX_LEVEL {
            return Err(Error::Capacity(format!("level {max_level} exceeds {MAX_LEVEL}")));
        }
        Ok(Self { origin, extent, max_level })
    }

    /// The unit square `[0,1)^2`.
    pub fn unit(max_level: u8) -> Result<Self> {
        Self::new(Point2D::new(T::zero(), T::zero()), T::one(), max_level)
    }

    /// Same domain with the finest level derived from a distance bound.
    pub fn with_bound(&self, epsilon: T) -> Result<Self> {
        let level = level_for_bound(self, epsilon)?;
        Ok(self.with_level(level))
    }

    pub fn with_level(&self, max_level: u8) -> Self {
        Self { max_level: max_level.min(MAX_LEVEL), ..*self }
    }

    /// Same origin and extent (level may differ).
    pub fn same_domain(&self, o: &Self) -> bool {
        self.origin == o.origin && self.extent == o.extent
    }

    pub fn cell_side(&self, level: u8) -> T {
        self.extent / T::pow2(level as u32)
    }

    /// Diagonal of a leaf cell: the distance bound this grid guarantees.
    pub fn leaf_diagonal(&self) -> T {
        self.cell_side(self.max_level) * T::SQRT_2()
    }

    /// World x of vertical grid line `k` at `level`. Cell bounds and canvas
    /// pixel bounds are both derived from this, so they agree bit for bit.
    #[inline]
    pub fn line_x(&self, k: u64, level: u8) -> T {
        self.origin.x + self.extent * (T::lit(k as f64) / T::pow2(level as u32))
    }

    #[inline]
    pub fn line_y(&self, k: u64, level: u8) -> T {
        self.origin.y + self.extent * (T::lit(k as f64) / T::pow2(level as u32))
    }

    /// The square covered by `c` as `(min, max)`; the max edges are exclusive.
    pub fn cell_bounds(&self, c: CellId) -> (Point2D<T>, Point2D<T>) {
        let (ix, iy) = z_decode(c.code);
        let (ix, iy) = (ix as u64, iy as u64);
        (
            Point2D::new(self.line_x(ix, c.level), self.line_y(iy, c.level)),
            Point2D::new(self.line_x(ix + 1, c.level), self.line_y(iy + 1, c.level)),
        )
    }

    pub fn cell_center(&self, c: CellId) -> Point2D<T> {
        let (lo, hi) = self.cell_bounds(c);
        let two = T::lit(2.0);
        Point2D::new((lo.x + hi.x) / two, (lo.y + hi.y) / two)
    }

    /// Half-open membership in the cell's square.
    pub fn cell_contains(&self, c: CellId, p: &Point2D<T>) -> bool {
        let (lo, hi) = self.cell_bounds(c);
        p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y
    }

    pub fn domain_mbr(&self) -> Mbr<T> {
        Mbr {
            min: self.origin,
            max: Point2D::new(self.origin.x + self.extent, self.origin.y + self.extent),
        }
    }

    /// Normalized position in `[0,1)^2`, or `None` outside the domain.
    #[inline]
    fn unit_pos(&self, p: &Point2D<T>) -> Option<(T, T)> {
        let u = (p.x - self.origin.x) / self.extent;
        let v = (p.y - self.origin.y) / self.extent;
        if u >= T::zero() && u < T::one() && v >= T::zero() && v < T::one() {
            Some((u, v))
        } else {
            None
        }
    }

    /// Column/row indexes of the cell containing `p` at `level`.
    ///
    /// The normalized position is scaled by a power of two, so the index at a
    /// coarser level is always the finer index shifted right: all levels agree.
    #[inline]
    pub fn cell_coords(&self, p: &Point2D<T>, level: u8) -> Option<(u32, u32)> {
        let (u, v) = self.unit_pos(p)?;
        let s = T::pow2(level as u32);
        let max = (1u64 << level) - 1;
        let ix = (u * s).floor().to_u64().unwrap_or(0).min(max);
        let iy = (v * s).floor().to_u64().unwrap_or(0).min(max);
        Some((ix as u32, iy as u32))
    }

    pub fn contains(&self, p: &Point2D<T>) -> bool {
        self.unit_pos(p).is_some()
    }

    /// Z-order code of the leaf cell (at `max_level`) containing `p`.
    #[inline]
    pub fn leaf_code(&self, p: &Point2D<T>) -> Result<u64> {
        point_to_cell(self, p, self.max_level).map(|c| c.code)
    }
}

/// Smallest level whose cell diagonal is at most `epsilon`.
pub fn level_for_bound<T: Scalar>(cfg: &GridConfig<T>, epsilon: T) -> Result<u8> {
    if !(epsilon > T::zero() && epsilon.is_finite()) {
        return Err(Error::Config(format!("distance bound must be positive, got {epsilon}")));
    }
    for level in 0..=MAX_LEVEL {
        if cfg.cell_side(level) * T::SQRT_2() <= epsilon {
            return Ok(level);
        }
    }
    Err(Error::Capacity(format!(
        "distance bound {epsilon} needs more than {MAX_LEVEL} levels for extent {}",
        cfg.extent
    )))
}

/// A cell of the quadtree, named by level and Z-order code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub level: u8,
    pub code: u64,
}

impl CellId {
    pub const ROOT: CellId = CellId { level: 0, code: 0 };

    pub fn new(level: u8, code: u64) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Domain(format!("level {level} exceeds {MAX_LEVEL}")));
        }
        if code >> (2 * level as u32) != 0 {
            return Err(Error::Domain(format!("code {code} out of range for level {level}")));
        }
        Ok(Self { level, code })
    }

    pub fn children(&self) -> Result<[CellId; 4]> {
        if self.level >= MAX_LEVEL {
            return Err(Error::Domain(format!("cell at level {} has no children", self.level)));
        }
        let l = self.level + 1;
        let b = self.code << 2;
        Ok([0, 1, 2, 3].map(|i| CellId { level: l, code: b | i }))
    }

    pub fn parent(&self) -> Result<CellId> {
        if self.level == 0 {
            return Err(Error::Domain("the root cell has no parent".into()));
        }
        Ok(CellId { level: self.level - 1, code: self.code >> 2 })
    }

    /// Leaf-code range covered by this cell at `max_level`.
    pub fn interval(&self, max_level: u8) -> CellInterval {
        cell_interval(*self, max_level)
    }

    /// Is `other` equal to or nested inside `self`?
    pub fn contains_cell(&self, other: &CellId) -> bool {
        other.level >= self.level && other.code >> (2 * (other.level - self.level) as u32) == self.code
    }

    pub fn to_le_bytes(&self) -> [u8; 9] {
        let mut b = [0u8; 9];
        b[0] = self.level;
        b[1..].copy_from_slice(&self.code.to_le_bytes());
        b
    }

    pub fn from_le_bytes(b: [u8; 9]) -> Result<Self> {
        let mut code = [0u8; 8];
        code.copy_from_slice(&b[1..]);
        Self::new(b[0], u64::from_le_bytes(code))
    }
}

/// Half-open range `[lo, hi)` of leaf codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellInterval {
    pub lo: u64,
    pub hi: u64,
}

impl CellInterval {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Domain(format!("interval [{lo}, {hi}) is reversed")));
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn contains(&self, code: u64) -> bool {
        code >= self.lo && code < self.hi
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn overlaps(&self, o: &Self) -> bool {
        self.lo < o.hi && o.lo < self.hi
    }
}

#[inline]
fn spread(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

#[inline]
fn compact(v: u64) -> u32 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x as u32
}

/// Interleave column/row bits into a Morton code.
pub fn z_encode(ix: u32, iy: u32, level: u8) -> Result<CellId> {
    if level > MAX_LEVEL {
        return Err(Error::Domain(format!("level {level} exceeds {MAX_LEVEL}")));
    }
    let lim = 1u64 << level;
    if ix as u64 >= lim || iy as u64 >= lim {
        return Err(Error::Domain(format!("({ix}, {iy}) outside a {lim}x{lim} grid")));
    }
    Ok(CellId { level, code: spread(ix) | (spread(iy) << 1) })
}

/// Inverse of [`z_encode`]: `(ix, iy)`.
pub fn z_decode(code: u64) -> (u32, u32) {
    (compact(code), compact(code >> 1))
}

pub fn point_to_cell<T: Scalar>(cfg: &GridConfig<T>, p: &Point2D<T>, level: u8) -> Result<CellId> {
    let (ix, iy) = cfg
        .cell_coords(p, level)
        .ok_or_else(|| Error::Domain(format!("point {p:?} outside the grid domain")))?;
    z_encode(ix, iy, level)
}

pub fn cell_interval(c: CellId, max_level: u8) -> CellInterval {
    debug_assert!(c.level <= max_level);
    let shift = 2 * (max_level - c.level) as u32;
    CellInterval { lo: c.code << shift, hi: (c.code + 1) << shift }
}
