//! Point-side index: points linearized to sorted leaf codes with prefix
//! aggregates, plus a RadixSpline learned index that replaces binary search
//! for the lower/upper-bound lookups.
//!
//! A cell covers a contiguous code range, so the points inside it are a
//! contiguous run of the sorted array and any prefix aggregate over the cell
//! is `prefix[hi_pos] - prefix[lo_pos]`.
//!
//! The COUNT prefix over sorted positions is the identity (`prefix[i] = i`) and
//! is not materialized. SUM prefixes are stored per configured attribute.

use crate::act::read_arr;
use crate::aggregate::{Aggregate, AttrFilter, CmpOp, Partial, WideSum};
use crate::error::{Error, Result};
use crate::geometry::{Point2D, PointDataset};
use crate::grid::{CellInterval, GridConfig};
use crate::scalar::Scalar;
use std::io::{Read, Write};

/// RadixSpline defaults used when nothing else is configured.
pub const DEFAULT_RADIX_BITS: u8 = 25;
pub const DEFAULT_MAX_ERROR: u32 = 32;

const MAGIC: &[u8; 4] = b"ELPS";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SumColumn {
    pub attr: String,
    /// Length `n + 1`, `prefix[0] = 0`.
    pub prefix: Vec<f64>,
    /// Every summed value is `>= 0`.
    pub nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedPointSet<T> {
    grid: GridConfig<T>,
    codes: Vec<u64>,
    perm: Vec<u32>,
    sums: Vec<SumColumn>,
    filter: Option<AttrFilter>,
}

pub fn lps_build<T: Scalar>(
    points: &PointDataset<T>,
    cfg: &GridConfig<T>,
    sum_attrs: &[&str],
) -> Result<LinearizedPointSet<T>> {
    lps_build_filtered(points, cfg, sum_attrs, None)
}

/// Build over the points passing `filter` only.
pub fn lps_build_filtered<T: Scalar>(
    points: &PointDataset<T>,
    cfg: &GridConfig<T>,
    sum_attrs: &[&str],
    filter: Option<&AttrFilter>,
) -> Result<LinearizedPointSet<T>> {
    if points.len() > u32::MAX as usize {
        return Err(Error::Capacity("more than 2^32 points".into()));
    }
    let attr_idx = sum_attrs.iter().map(|a| points.attr_index(a)).collect::<Result<Vec<_>>>()?;
    let bound = filter.map(|f| f.bind(points)).transpose()?;
    let mut keyed = Vec::with_capacity(points.len());
    for (i, r) in points.records().iter().enumerate() {
        let code = cfg.leaf_code(&r.loc).map_err(|_| {
            Error::Domain(format!("point {i} at {:?} lies outside the grid domain", r.loc))
        })?;
        if bound.as_ref().is_none_or(|b| b.matches(r)) {
            keyed.push((code, i as u32));
        }
    }
    keyed.sort_unstable();
    let codes: Vec<u64> = keyed.iter().map(|k| k.0).collect();
    let perm: Vec<u32> = keyed.iter().map(|k| k.1).collect();
    let recs = points.records();
    let sums = sum_attrs
        .iter()
        .zip(&attr_idx)
        .map(|(name, &a)| {
            let mut acc = WideSum::default();
            let mut prefix = Vec::with_capacity(perm.len() + 1);
            prefix.push(0.0);
            let mut nonnegative = true;
            for &p in &perm {
                let v = recs[p as usize].attrs[a];
                nonnegative &= v >= 0.0;
                acc.add(v);
                prefix.push(acc.value());
            }
            SumColumn { attr: name.to_string(), prefix, nonnegative }
        })
        .collect();
    Ok(LinearizedPointSet { grid: *cfg, codes, perm, sums, filter: filter.cloned() })
}

impl<T: Scalar> LinearizedPointSet<T> {
    pub fn grid(&self) -> &GridConfig<T> {
        &self.grid
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    /// Sorted position -> original point index.
    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn filter(&self) -> Option<&AttrFilter> {
        self.filter.as_ref()
    }

    pub fn sum_columns(&self) -> &[SumColumn] {
        &self.sums
    }

    /// COUNT prefix: number of points before sorted position `i`.
    #[inline]
    pub fn count_prefix(&self, i: usize) -> u64 {
        i as u64
    }

    pub fn sum_column(&self, attr: &str) -> Result<&SumColumn> {
        self.sums
            .iter()
            .find(|c| c.attr == attr)
            .ok_or_else(|| Error::Schema(format!("no SUM prefix for attribute `{attr}`")))
    }

    #[inline]
    fn lower_bound(&self, rs: Option<&RadixSplineIndex>, key: u64) -> usize {
        match rs {
            Some(rs) => rs.lower_bound(&self.codes, key),
            None => self.codes.partition_point(|&c| c < key),
        }
    }

    /// Leaf code of a location in this index's grid.
    pub fn code_of(&self, p: &Point2D<T>) -> Result<u64> {
        self.grid.leaf_code(p)
    }

    /// Binary form: header, grid, codes, permutation, SUM prefixes, filter,
    /// optional spline. Little-endian throughout.
    pub fn write_to<W: Write>(&self, w: &mut W, rs: Option<&RadixSplineIndex>) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.grid.max_level])?;
        for v in [self.grid.origin.x, self.grid.origin.y, self.grid.extent] {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
        w.write_all(&(self.codes.len() as u64).to_le_bytes())?;
        for c in &self.codes {
            w.write_all(&c.to_le_bytes())?;
        }
        for p in &self.perm {
            w.write_all(&p.to_le_bytes())?;
        }
        w.write_all(&(self.sums.len() as u32).to_le_bytes())?;
        for s in &self.sums {
            write_str(w, &s.attr)?;
            w.write_all(&[s.nonnegative as u8])?;
            for v in &s.prefix {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        match &self.filter {
            None => w.write_all(&[0])?,
            Some(f) => {
                w.write_all(&[1])?;
                write_str(w, &f.attr)?;
                w.write_all(&[f.op as u8])?;
                w.write_all(&f.value.to_le_bytes())?;
            }
        }
        match rs {
            None => w.write_all(&[0])?,
            Some(rs) => {
                w.write_all(&[1])?;
                rs.write_to(w)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<(Self, Option<RadixSplineIndex>)> {
        let magic = read_arr::<_, 4>(r)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a point index file".into()));
        }
        let version = u16::from_le_bytes(read_arr(r)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported point index version {version}")));
        }
        let [level] = read_arr::<_, 1>(r)?;
        let ox = read_f64(r)?;
        let oy = read_f64(r)?;
        let ext = read_f64(r)?;
        let grid = GridConfig::new(Point2D::new(T::lit(ox), T::lit(oy)), T::lit(ext), level)?;
        let n = read_u64(r)? as usize;
        let codes = (0..n).map(|_| read_u64(r)).collect::<Result<Vec<_>>>()?;
        if codes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("codes are not sorted".into()));
        }
        let perm =
            (0..n).map(|_| Ok(u32::from_le_bytes(read_arr(r)?))).collect::<Result<Vec<_>>>()?;
        let ns = u32::from_le_bytes(read_arr(r)?);
        let mut sums = Vec::new();
        for _ in 0..ns {
            let attr = read_str(r)?;
            let [nn] = read_arr::<_, 1>(r)?;
            let prefix = (0..=n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
            sums.push(SumColumn { attr, prefix, nonnegative: nn != 0 });
        }
        let filter = match read_arr::<_, 1>(r)? {
            [0] => None,
            _ => {
                let attr = read_str(r)?;
                let [op] = read_arr::<_, 1>(r)?;
                let op = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne]
                    .into_iter()
                    .find(|o| *o as u8 == op)
                    .ok_or_else(|| Error::Format(format!("bad filter operator {op}")))?;
                Some(AttrFilter { attr, op, value: read_f64(r)? })
            }
        };
        let rs = match read_arr::<_, 1>(r)? {
            [0] => None,
            _ => Some(RadixSplineIndex::read_from(r)?),
        };
        Ok((Self { grid, codes, perm, sums, filter }, rs))
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = u32::from_le_bytes(read_arr(r)?) as usize;
    if n > 1 << 20 {
        return Err(Error::Format("string too long".into()));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| Error::Format(e.to_string()))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_arr(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_arr(r)?))
}

/// Spline knot: a key and its lower-bound position in the sorted codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Knot {
    pub key: u64,
    pub pos: u64,
}

/// Learned index over sorted codes: an error-bounded linear spline over the
/// lower-bound function, with a radix table over key prefixes that narrows
/// the knot search.
///
/// The spline is fitted to `(k, first position of k)` for every distinct key
/// `k`, plus `(k + 1, first position of the next key)` wherever a gap follows.
/// That pins the step function `lower_bound` at both ends of every flat run,
/// so the interpolation is within `max_error` of `lower_bound(key)` for *every*
/// integer key in range, not just for stored keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RadixSplineIndex {
    requested_radix_bits: u8,
    radix_bits: u8,
    shift: u32,
    min_key: u64,
    max_key: u64,
    max_error: u64,
    n: u64,
    knots: Vec<Knot>,
    table: Vec<u32>,
}

/// Greedy spline corridor: emits a knot whenever the next point would leave
/// the cone of lines that keep all points since the last knot within `tau`.
struct Corridor {
    tau: i128,
    knots: Vec<Knot>,
    base: (i128, i128),
    upper: (i128, i128),
    lower: (i128, i128),
    prev: Knot,
    seen: usize,
}

#[inline]
fn cross(a: (i128, i128), b: (i128, i128)) -> i128 {
    a.0 * b.1 - a.1 * b.0
}

impl Corridor {
    fn new(tau: u64) -> Self {
        Self {
            tau: tau as i128,
            knots: Vec::new(),
            base: (0, 0),
            upper: (0, 0),
            lower: (0, 0),
            prev: Knot { key: 0, pos: 0 },
            seen: 0,
        }
    }

    fn add(&mut self, k: Knot) {
        let pt = (k.key as i128, k.pos as i128);
        match self.seen {
            0 => {
                self.knots.push(k);
                self.base = pt;
            }
            1 => {
                self.upper = (pt.0, pt.1 + self.tau);
                self.lower = (pt.0, pt.1 - self.tau);
            }
            _ => {
                let rel = |q: (i128, i128), b: (i128, i128)| (q.0 - b.0, q.1 - b.1);
                let c = rel(pt, self.base);
                let u = rel(self.upper, self.base);
                let l = rel(self.lower, self.base);
                if cross(u, c) > 0 || cross(l, c) < 0 {
                    self.knots.push(self.prev);
                    self.base = (self.prev.key as i128, self.prev.pos as i128);
                    self.upper = (pt.0, pt.1 + self.tau);
                    self.lower = (pt.0, pt.1 - self.tau);
                } else {
                    let nu = (pt.0, pt.1 + self.tau);
                    let nl = (pt.0, pt.1 - self.tau);
                    if cross(u, rel(nu, self.base)) < 0 {
                        self.upper = nu;
                    }
                    if cross(l, rel(nl, self.base)) > 0 {
                        self.lower = nl;
                    }
                }
            }
        }
        self.prev = k;
        self.seen += 1;
    }

    fn finish(mut self) -> Vec<Knot> {
        if self.seen > 1 {
            self.knots.push(self.prev);
        }
        self.knots
    }
}

fn shift_bits(diff: u64, radix_bits: u8) -> u32 {
    let used = 64 - diff.leading_zeros();
    used.saturating_sub(radix_bits as u32)
}

/// Fit a spline and radix table over `lps.codes()`.
///
/// `radix_bits` is clamped to `ceil(log2 n) + 1` so small inputs do not
/// allocate huge tables.
pub fn rs_build<T: Scalar>(
    lps: &LinearizedPointSet<T>,
    radix_bits: u8,
    max_error: u32,
) -> Result<RadixSplineIndex> {
    let width = 2 * lps.grid.max_level as u32;
    if radix_bits as u32 > width.max(1) {
        return Err(Error::Config(format!(
            "{radix_bits} radix bits exceed the {width}-bit code width"
        )));
    }
    RadixSplineIndex::build(&lps.codes, radix_bits, max_error)
}

impl RadixSplineIndex {
    /// Build over any sorted key array.
    pub fn build(codes: &[u64], radix_bits: u8, max_error: u32) -> Result<Self> {
        if codes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("keys must be sorted".into()));
        }
        if radix_bits > 62 {
            return Err(Error::Config(format!("{radix_bits} radix bits is too many")));
        }
        let n = codes.len();
        let clamp = (usize::BITS - n.max(1).leading_zeros()) as u8 + 1;
        let eff = radix_bits.min(clamp);
        let mut rs = Self {
            requested_radix_bits: radix_bits,
            radix_bits: eff,
            shift: 0,
            min_key: 0,
            max_key: 0,
            max_error: max_error as u64,
            n: n as u64,
            knots: Vec::new(),
            table: Vec::new(),
        };
        if n == 0 {
            return Ok(rs);
        }
        let mut corridor = Corridor::new(max_error as u64);
        let mut i = 0;
        while i < n {
            let key = codes[i];
            let mut j = i + 1;
            while j < n && codes[j] == key {
                j += 1;
            }
            corridor.add(Knot { key, pos: i as u64 });
            let next = if j < n { Some(codes[j]) } else { None };
            match key.checked_add(1) {
                Some(k1) if next.is_none_or(|nx| k1 < nx) => {
                    corridor.add(Knot { key: k1, pos: j as u64 });
                }
                _ => {}
            }
            i = j;
        }
        rs.knots = corridor.finish();
        rs.min_key = rs.knots[0].key;
        rs.max_key = rs.knots[rs.knots.len() - 1].key;
        rs.shift = shift_bits(rs.max_key - rs.min_key, eff);
        let slots = ((rs.max_key - rs.min_key) >> rs.shift) as usize + 2;
        rs.table = vec![0; slots];
        let mut k = 0usize;
        for (p, slot) in rs.table.iter_mut().enumerate() {
            while k < rs.knots.len() && (((rs.knots[k].key - rs.min_key) >> rs.shift) as usize) < p {
                k += 1;
            }
            *slot = k as u32;
        }
        Ok(rs)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn max_error(&self) -> u64 {
        self.max_error
    }

    /// Radix bits actually used after clamping.
    pub fn radix_bits(&self) -> u8 {
        self.radix_bits
    }

    pub fn requested_radix_bits(&self) -> u8 {
        self.requested_radix_bits
    }

    pub fn memory_bytes(&self) -> usize {
        self.knots.len() * std::mem::size_of::<Knot>() + self.table.len() * 4
    }

    /// Segment `(a, b)` with `a.key <= key < b.key`; requires
    /// `min_key <= key < max_key`.
    #[inline]
    fn segment(&self, key: u64) -> (Knot, Knot) {
        let p = ((key - self.min_key) >> self.shift) as usize;
        let begin = (self.table[p] as usize).saturating_sub(1);
        let end = (self.table[p + 1] as usize).min(self.knots.len());
        let i = begin + self.knots[begin..end].partition_point(|k| k.key <= key) - 1;
        (self.knots[i], self.knots[i + 1])
    }

    /// Exact interpolation as a rational `num / den`.
    #[inline]
    fn interpolate(&self, key: u64) -> (u128, u128) {
        if key <= self.min_key {
            return (self.knots[0].pos as u128, 1);
        }
        if key >= self.max_key {
            return (self.knots[self.knots.len() - 1].pos as u128, 1);
        }
        let (a, b) = self.segment(key);
        let den = (b.key - a.key) as u128;
        let num = a.pos as u128 * den + (key - a.key) as u128 * (b.pos - a.pos) as u128;
        (num, den)
    }

    /// Predicted position (floor of the interpolation).
    pub fn predict(&self, key: u64) -> u64 {
        if self.n == 0 {
            return 0;
        }
        let (num, den) = self.interpolate(key);
        (num / den) as u64
    }

    /// Exact check `|interpolation(key) - pos| <= tol`.
    pub fn prediction_within(&self, key: u64, pos: u64, tol: u64) -> bool {
        if self.n == 0 {
            return pos == 0;
        }
        let (num, den) = self.interpolate(key);
        let target = pos as u128 * den;
        num.abs_diff(target) <= tol as u128 * den
    }

    /// First position in `codes` with a value `>= key`; `codes` must be the
    /// array this index was built on.
    #[inline]
    pub fn lower_bound(&self, codes: &[u64], key: u64) -> usize {
        debug_assert_eq!(codes.len() as u64, self.n);
        if self.n == 0 || key <= self.min_key {
            return 0;
        }
        if key > self.max_key {
            return self.n as usize;
        }
        // |interp - lb| <= tau and lb is an integer, so lb is within tau of
        // floor(interp).
        let pred = self.predict(key);
        let lo = pred.saturating_sub(self.max_error) as usize;
        let hi = (pred + self.max_error).min(self.n) as usize;
        lo + codes[lo..hi].partition_point(|&c| c < key)
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&[self.requested_radix_bits, self.radix_bits])?;
        w.write_all(&(self.max_error as u32).to_le_bytes())?;
        w.write_all(&self.shift.to_le_bytes())?;
        for v in [self.min_key, self.max_key, self.n, self.knots.len() as u64, self.table.len() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for k in &self.knots {
            w.write_all(&k.key.to_le_bytes())?;
            w.write_all(&k.pos.to_le_bytes())?;
        }
        for t in &self.table {
            w.write_all(&t.to_le_bytes())?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let [requested_radix_bits, radix_bits] = read_arr::<_, 2>(r)?;
        let max_error = u32::from_le_bytes(read_arr(r)?) as u64;
        let shift = u32::from_le_bytes(read_arr(r)?);
        let min_key = read_u64(r)?;
        let max_key = read_u64(r)?;
        let n = read_u64(r)?;
        let nk = read_u64(r)? as usize;
        let nt = read_u64(r)? as usize;
        if nt > (1 << 40) || nk > (1 << 40) {
            return Err(Error::Format("implausible spline size".into()));
        }
        let knots = (0..nk)
            .map(|_| Ok(Knot { key: read_u64(r)?, pos: read_u64(r)? }))
            .collect::<Result<Vec<_>>>()?;
        let table =
            (0..nt).map(|_| Ok(u32::from_le_bytes(read_arr(r)?))).collect::<Result<Vec<_>>>()?;
        if n > 0 && (knots.is_empty() || table.len() != ((max_key - min_key) >> shift) as usize + 2) {
            return Err(Error::Format("inconsistent spline tables".into()));
        }
        Ok(Self { requested_radix_bits, radix_bits, shift, min_key, max_key, max_error, n, knots, table })
    }
}

/// `(lo_pos, hi_pos)`: first positions with code `>= iv.lo` and `>= iv.hi`.
pub fn bounds_lookup<T: Scalar>(
    lps: &LinearizedPointSet<T>,
    rs: Option<&RadixSplineIndex>,
    iv: CellInterval,
) -> (usize, usize) {
    let lo = lps.lower_bound(rs, iv.lo);
    let hi = if iv.hi == iv.lo { lo } else { lps.lower_bound(rs, iv.hi) };
    (lo, hi)
}

/// COUNT and SUM partial over disjoint intervals, via prefix subtraction.
pub fn range_partial<T: Scalar>(
    lps: &LinearizedPointSet<T>,
    rs: Option<&RadixSplineIndex>,
    cells: &[CellInterval],
    sum: Option<&SumColumn>,
) -> Partial {
    let mut acc = Partial::default();
    for iv in cells {
        let (lo, hi) = bounds_lookup(lps, rs, *iv);
        acc.count += lps.count_prefix(hi) - lps.count_prefix(lo);
        if let Some(s) = sum {
            acc.sum += s.prefix[hi] - s.prefix[lo];
        }
    }
    acc
}

/// Aggregate over the points inside the given (pairwise disjoint) intervals.
/// AVG over an empty selection is `None`.
pub fn range_aggregate<T: Scalar>(
    lps: &LinearizedPointSet<T>,
    rs: Option<&RadixSplineIndex>,
    cells: &[CellInterval],
    agg: &Aggregate,
) -> Result<Option<f64>> {
    let col = agg.attr().map(|a| lps.sum_column(a)).transpose()?;
    Ok(range_partial(lps, rs, cells, col).finalize(agg))
}
