//! Exact planar geometry: points, rectangles, polygons with holes, and the
//! brute-force predicates (point-in-polygon, boundary distance, Hausdorff
//! distance) that every approximate structure in this crate is audited
//! against.
//!
//! Polygons are validated once at construction. After that every operation is
//! infallible, so the predicates here return plain values.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2D<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2D<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dist2(&self, o: &Self) -> T {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, o: &Self) -> T {
        self.dist2(o).sqrt()
    }
}

/// Axis-aligned minimum bounding rectangle (closed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mbr<T> {
    pub min: Point2D<T>,
    pub max: Point2D<T>,
}

impl<T: Scalar> Mbr<T> {
    pub fn new(min: Point2D<T>, max: Point2D<T>) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min.x > max.x || min.y > max.y {
            return Err(Error::Structural(format!(
                "degenerate MBR min={min:?} max={max:?}"
            )));
        }
        Ok(Self { min, max })
    }

    /// Bounding rectangle of a non-empty point sequence.
    pub fn of_points<'a, I>(pts: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Point2D<T>>,
    {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut m = Self { min: first, max: first };
        for p in it {
            m.extend(p);
        }
        Some(m)
    }

    pub fn extend(&mut self, p: &Point2D<T>) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, o: &Self) -> Self {
        let mut m = *self;
        m.extend(&o.min);
        m.extend(&o.max);
        m
    }

    #[inline]
    pub fn contains(&self, p: &Point2D<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    #[inline]
    pub fn intersects(&self, o: &Self) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }
}

/// Simple polygon with optional holes.
///
/// Rings are stored open (first vertex not repeated). The outer ring is
/// counter-clockwise and holes are clockwise; [`Polygon::new`] reorients its
/// input as needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T> {
    outer: Vec<Point2D<T>>,
    holes: Vec<Vec<Point2D<T>>>,
    mbr: Mbr<T>,
}

fn signed_area<T: Scalar>(ring: &[Point2D<T>]) -> T {
    let n = ring.len();
    let mut acc = T::zero();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / T::lit(2.0)
}

fn clean_ring<T: Scalar>(mut ring: Vec<Point2D<T>>, what: &str) -> Result<Vec<Point2D<T>>> {
    if let Some(p) = ring.iter().find(|p| !p.is_finite()) {
        return Err(Error::Structural(format!("{what}: non-finite vertex {p:?}")));
    }
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::Structural(format!(
            "{what}: ring needs at least 3 distinct vertices"
        )));
    }
    Ok(ring)
}

#[inline]
fn orient<T: Scalar>(a: &Point2D<T>, b: &Point2D<T>, c: &Point2D<T>) -> T {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[inline]
fn within_box<T: Scalar>(a: &Point2D<T>, b: &Point2D<T>, p: &Point2D<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// True iff `p` lies on the closed segment `ab`.
#[inline]
pub fn on_segment<T: Scalar>(a: &Point2D<T>, b: &Point2D<T>, p: &Point2D<T>) -> bool {
    orient(a, b, p) == T::zero() && within_box(a, b, p)
}

fn segments_intersect<T: Scalar>(
    a: &Point2D<T>,
    b: &Point2D<T>,
    c: &Point2D<T>,
    d: &Point2D<T>,
) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    let z = T::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    (o1 == z && within_box(a, b, c))
        || (o2 == z && within_box(a, b, d))
        || (o3 == z && within_box(c, d, a))
        || (o4 == z && within_box(c, d, b))
}

impl<T: Scalar> Polygon<T> {
    /// Validates and orients a polygon.
    pub fn new(outer: Vec<Point2D<T>>, holes: Vec<Vec<Point2D<T>>>) -> Result<Self> {
        let mut outer = clean_ring(outer, "outer ring")?;
        let area = signed_area(&outer);
        if area == T::zero() || !area.is_finite() {
            return Err(Error::Structural("outer ring has zero area".into()));
        }
        if area < T::zero() {
            outer.reverse();
        }
        let mut hs = Vec::with_capacity(holes.len());
        for (i, h) in holes.into_iter().enumerate() {
            let mut h = clean_ring(h, &format!("hole {i}"))?;
            let a = signed_area(&h);
            if a == T::zero() {
                return Err(Error::Structural(format!("hole {i} has zero area")));
            }
            if a > T::zero() {
                h.reverse();
            }
            hs.push(h);
        }
        let mbr = Mbr::of_points(outer.iter()).expect("non-empty ring");
        let poly = Self { outer, holes: hs, mbr };
        poly.check_simple()?;
        for (i, h) in poly.holes.iter().enumerate() {
            if !ring_contains(&poly.outer, &h[0]) {
                return Err(Error::Structural(format!("hole {i} lies outside the outer ring")));
            }
            for (j, o) in poly.holes.iter().enumerate() {
                if i != j && ring_contains(o, &h[0]) {
                    return Err(Error::Structural(format!("hole {i} is nested in hole {j}")));
                }
            }
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle `[x0,x1] x [y0,y1]`.
    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        Self::new(
            vec![
                Point2D::new(x0, y0),
                Point2D::new(x1, y0),
                Point2D::new(x1, y1),
                Point2D::new(x0, y1),
            ],
            vec![],
        )
    }

    pub fn outer(&self) -> &[Point2D<T>] {
        &self.outer
    }

    pub fn holes(&self) -> &[Vec<Point2D<T>>] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point2D<T>]> {
        std::iter::once(self.outer.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    /// All ring edges as `(start, end)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (Point2D<T>, Point2D<T>)> + '_ {
        self.rings().flat_map(|r| {
            let n = r.len();
            (0..n).map(move |i| (r[i], r[(i + 1) % n]))
        })
    }

    pub fn num_edges(&self) -> usize {
        self.outer.len() + self.holes.iter().map(Vec::len).sum::<usize>()
    }

    pub fn mbr(&self) -> Mbr<T> {
        self.mbr
    }

    /// Area of the outer ring minus holes.
    pub fn area(&self) -> T {
        self.holes.iter().fold(signed_area(&self.outer), |a, h| a + signed_area(h))
    }

    pub fn contains(&self, p: &Point2D<T>) -> bool {
        point_in_polygon(p, self)
    }

    // Sweep over edges sorted by min x; only x-overlapping pairs are tested.
    fn check_simple(&self) -> Result<()> {
        struct Seg<T> {
            a: Point2D<T>,
            b: Point2D<T>,
            ring: usize,
            idx: usize,
            len: usize,
        }
        let mut segs = Vec::with_capacity(self.num_edges());
        for (ri, r) in self.rings().enumerate() {
            let n = r.len();
            for i in 0..n {
                segs.push(Seg { a: r[i], b: r[(i + 1) % n], ring: ri, idx: i, len: n });
            }
        }
        segs.sort_by(|s, t| {
            s.a.x.min(s.b.x).partial_cmp(&t.a.x.min(t.b.x)).expect("finite")
        });
        for i in 0..segs.len() {
            let s = &segs[i];
            let sx1 = s.a.x.max(s.b.x);
            for t in &segs[i + 1..] {
                if t.a.x.min(t.b.x) > sx1 {
                    break;
                }
                let adjacent = s.ring == t.ring
                    && (s.idx + 1) % s.len == t.idx || (t.ring == s.ring && (t.idx + 1) % t.len == s.idx);
                if adjacent {
                    // Consecutive edges share exactly one vertex; reject collinear overlap.
                    let (shared, p, q) = if s.b == t.a { (s.b, s.a, t.b) } else { (s.a, s.b, t.a) };
                    if orient(&p, &shared, &q) == T::zero()
                        && (q.x - shared.x) * (p.x - shared.x) + (q.y - shared.y) * (p.y - shared.y)
                            > T::zero()
                    {
                        return Err(Error::Structural(format!(
                            "ring {} folds back on itself at {shared:?}",
                            s.ring
                        )));
                    }
                    continue;
                }
                if segments_intersect(&s.a, &s.b, &t.a, &t.b) {
                    return Err(Error::Structural(format!(
                        "edges {:?}-{:?} and {:?}-{:?} intersect",
                        s.a, s.b, t.a, t.b
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Even-odd containment for a single ring; boundary counts as inside.
fn ring_contains<T: Scalar>(ring: &[Point2D<T>], p: &Point2D<T>) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if on_segment(&a, &b, p) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < xi {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Exact point-in-polygon test by ray casting over all rings.
///
/// Points on any ring (outer or hole) classify as inside.
pub fn point_in_polygon<T: Scalar>(p: &Point2D<T>, poly: &Polygon<T>) -> bool {
    if !poly.mbr.contains(p) {
        return false;
    }
    let mut inside = false;
    for ring in poly.rings() {
        let n = ring.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (ring[i], ring[j]);
            if on_segment(&a, &b, p) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < xi {
                    inside = !inside;
                }
            }
            j = i;
        }
    }
    inside
}

/// Euclidean distance from `p` to segment `ab`.
pub fn point_segment_distance<T: Scalar>(p: &Point2D<T>, a: &Point2D<T>, b: &Point2D<T>) -> T {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == T::zero() {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).max(T::zero()).min(T::one());
    let q = Point2D::new(a.x + t * dx, a.y + t * dy);
    p.dist(&q)
}

/// Minimum distance from `p` to any ring edge of `poly`.
pub fn distance_to_boundary<T: Scalar>(p: &Point2D<T>, poly: &Polygon<T>) -> T {
    poly.edges()
        .map(|(a, b)| point_segment_distance(p, &a, &b))
        .fold(T::infinity(), T::min)
}

pub fn mbr_of<T: Scalar>(poly: &Polygon<T>) -> Mbr<T> {
    poly.mbr
}

/// Does segment `ab` meet the *open* rectangle `(x0,x1) x (y0,y1)`?
///
/// Segments running along the rectangle border do not count. This is the
/// predicate that decides whether a grid cell is crossed by a polygon edge.
pub fn segment_crosses_open_rect<T: Scalar>(
    a: &Point2D<T>,
    b: &Point2D<T>,
    min: &Point2D<T>,
    max: &Point2D<T>,
) -> bool {
    // Liang-Barsky clip against the closed box, then test the clipped midpoint.
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let mut t0 = T::zero();
    let mut t1 = T::one();
    let z = T::zero();
    for (p, q) in [
        (-dx, a.x - min.x),
        (dx, max.x - a.x),
        (-dy, a.y - min.y),
        (dy, max.y - a.y),
    ] {
        if p == z {
            if q < z {
                return false;
            }
        } else {
            let r = q / p;
            if p < z {
                if r > t1 {
                    return false;
                }
                if r > t0 {
                    t0 = r;
                }
            } else {
                if r < t0 {
                    return false;
                }
                if r < t1 {
                    t1 = r;
                }
            }
        }
    }
    let tm = (t0 + t1) / T::lit(2.0);
    let mx = a.x + tm * dx;
    let my = a.y + tm * dy;
    mx > min.x && mx < max.x && my > min.y && my < max.y
}

/// Symmetric Hausdorff distance between two finite point samples.
///
/// Nearest-neighbour queries run over an x-sorted copy of the target set with
/// an early exit once a source point cannot raise the running maximum.
pub fn hausdorff_distance<T: Scalar>(a: &[Point2D<T>], b: &[Point2D<T>]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Hausdorff distance of an empty sample".into()));
    }
    let sa = sorted_by_x(a);
    let sb = sorted_by_x(b);
    Ok(directed_hausdorff2(a, &sb).max(directed_hausdorff2(b, &sa)).sqrt())
}

fn sorted_by_x<T: Scalar>(pts: &[Point2D<T>]) -> Vec<Point2D<T>> {
    let mut v = pts.to_vec();
    v.sort_by(|p, q| p.x.partial_cmp(&q.x).expect("finite sample"));
    v
}

/// Squared directed distance `max_{p in from} min_{q in to} |p - q|^2`.
fn directed_hausdorff2<T: Scalar>(from: &[Point2D<T>], to: &[Point2D<T>]) -> T {
    let n = to.len();
    let mut cmax = T::zero();
    for p in from {
        let start = to.partition_point(|q| q.x < p.x);
        let (mut lo, mut hi) = (start, start);
        let mut best = T::infinity();
        loop {
            let mut moved = false;
            if hi < n {
                let dx = to[hi].x - p.x;
                if dx * dx >= best {
                    hi = n;
                } else {
                    best = best.min(p.dist2(&to[hi]));
                    hi += 1;
                    moved = true;
                }
            }
            if lo > 0 {
                let dx = p.x - to[lo - 1].x;
                if dx * dx >= best {
                    lo = 0;
                } else {
                    best = best.min(p.dist2(&to[lo - 1]));
                    lo -= 1;
                    moved = true;
                }
            }
            if best <= cmax || !moved {
                break;
            }
        }
        cmax = cmax.max(best);
    }
    cmax
}

/// Lattice points `(i*step, j*step)` inside `bounds` that satisfy `keep`.
///
/// The lattice is anchored at the coordinate origin, so two samples taken with
/// the same step share grid points.
pub fn lattice_sample<T: Scalar, F>(bounds: &Mbr<T>, step: T, mut keep: F) -> Vec<Point2D<T>>
where
    F: FnMut(&Point2D<T>) -> bool,
{
    let i0 = (bounds.min.x / step).ceil().to_i64().unwrap_or(0);
    let i1 = (bounds.max.x / step).floor().to_i64().unwrap_or(-1);
    let j0 = (bounds.min.y / step).ceil().to_i64().unwrap_or(0);
    let j1 = (bounds.max.y / step).floor().to_i64().unwrap_or(-1);
    let mut out = Vec::new();
    for j in j0..=j1 {
        let y = T::lit(j as f64) * step;
        for i in i0..=i1 {
            let p = Point2D::new(T::lit(i as f64) * step, y);
            if keep(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// A data point with its location and attribute values.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord<T> {
    pub loc: Point2D<T>,
    pub attrs: Vec<f64>,
}

impl<T: Scalar> PointRecord<T> {
    pub fn new(loc: Point2D<T>, attrs: Vec<f64>) -> Self {
        Self { loc, attrs }
    }

    pub fn at(x: T, y: T) -> Self {
        Self { loc: Point2D::new(x, y), attrs: Vec::new() }
    }
}

/// Points sharing one attribute schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointDataset<T> {
    attr_names: Vec<String>,
    records: Vec<PointRecord<T>>,
}

impl<T: Scalar> PointDataset<T> {
    pub fn new(attr_names: Vec<String>, records: Vec<PointRecord<T>>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.attrs.len() != attr_names.len() {
                return Err(Error::Schema(format!(
                    "point {i} has {} attributes, schema has {}",
                    r.attrs.len(),
                    attr_names.len()
                )));
            }
            if !r.loc.is_finite() {
                return Err(Error::Domain(format!("point {i} has a non-finite location")));
            }
        }
        Ok(Self { attr_names, records })
    }

    /// Attribute-free dataset from bare locations.
    pub fn from_locations(locs: impl IntoIterator<Item = Point2D<T>>) -> Self {
        Self {
            attr_names: Vec::new(),
            records: locs.into_iter().map(|loc| PointRecord { loc, attrs: Vec::new() }).collect(),
        }
    }

    pub fn attr_names(&self) -> &[String] {
        &self.attr_names
    }

    pub fn records(&self) -> &[PointRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn attr_index(&self, name: &str) -> Result<usize> {
        self.attr_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Schema(format!("unknown attribute `{name}`")))
    }
}

/// A query region: one id, one or more polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord<T> {
    pub id: u64,
    pub polygons: Vec<Polygon<T>>,
}

impl<T: Scalar> RegionRecord<T> {
    pub fn new(id: u64, polygon: Polygon<T>) -> Self {
        Self { id, polygons: vec![polygon] }
    }

    pub fn multi(id: u64, polygons: Vec<Polygon<T>>) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::Structural(format!("region {id} has no polygons")));
        }
        Ok(Self { id, polygons })
    }

    pub fn contains(&self, p: &Point2D<T>) -> bool {
        self.polygons.iter().any(|g| point_in_polygon(p, g))
    }

    pub fn distance_to_boundary(&self, p: &Point2D<T>) -> T {
        self.polygons.iter().map(|g| distance_to_boundary(p, g)).fold(T::infinity(), T::min)
    }

    pub fn mbr(&self) -> Mbr<T> {
        let mut it = self.polygons.iter().map(Polygon::mbr);
        let first = it.next().expect("region has polygons");
        it.fold(first, |a, b| a.union(&b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2D<f64> {
        Point2D::new(x, y)
    }

    fn unit_square() -> Polygon<f64> {
        Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    // Independent oracle: winding number over all rings.
    fn winding_contains(q: &Point2D<f64>, poly: &Polygon<f64>) -> bool {
        let mut wn = 0i32;
        for ring in poly.rings() {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                let side = (b.x - a.x) * (q.y - a.y) - (q.x - a.x) * (b.y - a.y);
                if a.y <= q.y {
                    if b.y > q.y && side > 0.0 {
                        wn += 1;
                    }
                } else if b.y <= q.y && side < 0.0 {
                    wn -= 1;
                }
            }
        }
        wn != 0
    }

    #[test]
    fn pip_examples() {
        assert!(point_in_polygon(&p(0.5, 0.5), &unit_square()));
        assert!(!point_in_polygon(&p(2.0, 2.0), &unit_square()));
        let holed = Polygon::new(
            unit_square().outer().to_vec(),
            vec![vec![p(0.4, 0.4), p(0.6, 0.4), p(0.6, 0.6), p(0.4, 0.6)]],
        )
        .unwrap();
        assert!(!point_in_polygon(&p(0.5, 0.5), &holed));
        assert!(point_in_polygon(&p(0.2, 0.5), &holed));
    }

    #[test]
    fn pip_boundary_is_inside() {
        let sq = unit_square();
        for q in [p(0.0, 0.0), p(1.0, 0.5), p(0.5, 1.0), p(0.0, 0.3)] {
            assert!(point_in_polygon(&q, &sq), "{q:?}");
        }
        let holed = Polygon::new(
            sq.outer().to_vec(),
            vec![vec![p(0.4, 0.4), p(0.6, 0.4), p(0.6, 0.6), p(0.4, 0.6)]],
        )
        .unwrap();
        assert!(point_in_polygon(&p(0.4, 0.5), &holed));
    }

    #[test]
    fn pip_agrees_with_winding_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let polys: Vec<_> =
            (0..50).map(|i| crate::synth::random_polygon(&mut rng, 0.05, 0.4, 12, i % 3 == 0)).collect();
        let mut checked = 0;
        while checked < 100_000 {
            let poly = &polys[rng.gen_range(0..polys.len())];
            let q = p(rng.gen(), rng.gen());
            if distance_to_boundary(&q, poly) < 1e-9 {
                continue;
            }
            assert_eq!(point_in_polygon(&q, poly), winding_contains(&q, poly), "{q:?}");
            checked += 1;
        }
    }

    #[test]
    fn boundary_distance_examples() {
        let sq = unit_square();
        assert!((distance_to_boundary(&p(0.5, 0.5), &sq) - 0.5).abs() < 1e-15);
        assert_eq!(distance_to_boundary(&p(1.0, 1.0), &sq), 0.0);
        assert!((distance_to_boundary(&p(2.0, 0.5), &sq) - 1.0).abs() < 1e-15);
        for v in sq.outer() {
            assert_eq!(distance_to_boundary(v, &sq), 0.0);
        }
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff_distance(&[p(0.0, 0.0)], &[p(3.0, 4.0)]).unwrap(), 5.0);
        let a = vec![p(0.1, 0.2), p(0.5, 0.5), p(0.9, 0.3)];
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        assert!(hausdorff_distance::<f64>(&[], &a).is_err());

        let step = 0.005;
        let big = Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        let small = Polygon::rect(0.25, 0.25, 0.75, 0.75).unwrap();
        let sa = lattice_sample(&small.mbr(), step, |q| small.contains(q));
        let sb = lattice_sample(&big.mbr(), step, |q| big.contains(q));
        let h = hausdorff_distance(&sa, &sb).unwrap();
        let expect = 0.25 * std::f64::consts::SQRT_2;
        assert!((h - expect).abs() <= step * std::f64::consts::SQRT_2, "{h} vs {expect}");
    }

    #[test]
    fn hausdorff_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: Vec<_> = (0..200).map(|_| p(rng.gen(), rng.gen())).collect();
            let b: Vec<_> = (0..150).map(|_| p(rng.gen::<f64>() * 2.0, rng.gen())).collect();
            let directed = |x: &[Point2D<f64>], y: &[Point2D<f64>]| {
                x.iter()
                    .map(|u| y.iter().map(|v| u.dist(v)).fold(f64::INFINITY, f64::min))
                    .fold(0.0, f64::max)
            };
            let brute = directed(&a, &b).max(directed(&b, &a));
            let fast = hausdorff_distance(&a, &b).unwrap();
            assert_eq!(brute, fast);
            assert_eq!(fast, hausdorff_distance(&b, &a).unwrap());
        }
    }

    #[test]
    fn mbr_examples() {
        let m = mbr_of(&unit_square());
        assert_eq!((m.min, m.max), (p(0.0, 0.0), p(1.0, 1.0)));
        let tri = Polygon::new(vec![p(0.0, 0.0), p(2.0, 0.0), p(1.0, 3.0)], vec![]).unwrap();
        let m = mbr_of(&tri);
        assert_eq!((m.min, m.max), (p(0.0, 0.0), p(2.0, 3.0)));
        let rot =
            Polygon::new(vec![p(1.0, 0.0), p(2.0, 1.0), p(1.0, 2.0), p(0.0, 1.0)], vec![]).unwrap();
        let m = mbr_of(&rot);
        assert_eq!((m.min, m.max), (p(0.0, 0.0), p(2.0, 2.0)));
    }

    #[test]
    fn invalid_polygons_rejected() {
        assert!(Polygon::new(vec![p(0.0, 0.0), p(1.0, 0.0)], vec![]).is_err());
        assert!(Polygon::new(vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)], vec![]).is_err());
        // bow tie
        let bow = vec![p(0.0, 0.0), p(1.0, 1.0), p(1.0, 0.0), p(0.0, 1.0)];
        assert!(matches!(Polygon::new(bow, vec![]), Err(Error::Structural(_))));
        let hole_out = vec![p(2.0, 2.0), p(3.0, 2.0), p(3.0, 3.0)];
        assert!(Polygon::new(unit_square().outer().to_vec(), vec![hole_out]).is_err());
        assert!(Polygon::new(vec![p(0.0, 0.0), p(f64::NAN, 0.0), p(1.0, 1.0)], vec![]).is_err());
    }

    #[test]
    fn orientation_is_normalized() {
        let cw = Polygon::new(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0), p(1.0, 0.0)], vec![]).unwrap();
        assert!(signed_area(cw.outer()) > 0.0);
        let holed = Polygon::new(
            cw.outer().to_vec(),
            vec![vec![p(0.4, 0.4), p(0.6, 0.4), p(0.6, 0.6), p(0.4, 0.6)]],
        )
        .unwrap();
        assert!(signed_area(&holed.holes()[0]) < 0.0);
        assert!((holed.area() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn open_rect_crossing() {
        let (lo, hi) = (p(0.0, 0.0), p(1.0, 1.0));
        assert!(segment_crosses_open_rect(&p(-1.0, 0.5), &p(2.0, 0.5), &lo, &hi));
        // along an edge
        assert!(!segment_crosses_open_rect(&p(0.0, -1.0), &p(0.0, 2.0), &lo, &hi));
        // through a corner only
        assert!(!segment_crosses_open_rect(&p(-1.0, 1.0), &p(1.0, -1.0), &lo, &hi));
        // fully inside
        assert!(segment_crosses_open_rect(&p(0.2, 0.2), &p(0.3, 0.4), &lo, &hi));
        // outside
        assert!(!segment_crosses_open_rect(&p(2.0, 2.0), &p(3.0, 0.0), &lo, &hi));
        // endpoint touching the border from outside
        assert!(!segment_crosses_open_rect(&p(1.0, 0.5), &p(2.0, 0.5), &lo, &hi));
    }

    #[test]
    fn works_in_f32() {
        let sq = Polygon::<f32>::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(point_in_polygon(&Point2D::new(0.5f32, 0.5), &sq));
        assert!((distance_to_boundary(&Point2D::new(2.0f32, 0.5), &sq) - 1.0).abs() < 1e-6);
    }
}
