//! Adaptive Cell Trie: a radix tree keyed by Z-order codes of covering cells.
//!
//! Each node consumes `radix_width` bits of a leaf code (2 bits per quadtree
//! level). A cell whose code ends in the middle of a node's chunk is recorded
//! in every slot that shares its prefix, so a cell at level `l` is found after
//! visiting at most `ceil(2l / radix_width)` nodes and coarse cells live close
//! to the root. Lookups walk the path of a point's leaf code and collect every
//! terminal entry on the way.

use crate::error::{Error, Result};
use crate::geometry::Point2D;
use crate::grid::{CellId, GridConfig};
use crate::raster::{CellKind, RasterApprox};
use crate::scalar::Scalar;
use std::io::{Read, Write};

const NONE: u32 = u32::MAX;
const MAGIC: &[u8; 4] = b"EACT";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hit {
    pub region_id: u64,
    pub kind: CellKind,
}

#[derive(Debug, Clone)]
struct Node {
    children: Box<[u32]>,
    terms: Box<[u32]>,
}

impl Node {
    fn new(fanout: usize) -> Self {
        Self { children: vec![NONE; fanout].into(), terms: vec![NONE; fanout].into() }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveCellTrie<T> {
    grid: GridConfig<T>,
    radix_width: u8,
    /// Padded key width: `2 * max_level` rounded up to a multiple of the radix.
    key_bits: u32,
    root_terms: Vec<Hit>,
    nodes: Vec<Node>,
    term_lists: Vec<Vec<Hit>>,
    num_cells: usize,
}

/// Build a trie over all cells of `coverings`.
pub fn act_build<T: Scalar>(coverings: &[RasterApprox<T>], radix_width: u8) -> Result<AdaptiveCellTrie<T>> {
    let grid = match coverings.first() {
        Some(c) => *c.grid(),
        None => return Err(Error::Config("cannot infer a grid from zero coverings".into())),
    };
    let mut t = AdaptiveCellTrie::new(grid, radix_width)?;
    for cov in coverings {
        if !cov.grid().same_domain(&grid) || cov.max_level() != grid.max_level {
            return Err(Error::Config(format!(
                "covering of region {} uses a different grid",
                cov.region_id()
            )));
        }
        for c in cov.cells() {
            t.insert(c.cell, Hit { region_id: cov.region_id(), kind: c.kind });
        }
    }
    t.finish();
    Ok(t)
}

impl<T: Scalar> AdaptiveCellTrie<T> {
    /// Empty trie over `grid`.
    pub fn new(grid: GridConfig<T>, radix_width: u8) -> Result<Self> {
        if !matches!(radix_width, 2 | 4 | 8) {
            return Err(Error::Config(format!("radix width must be 2, 4 or 8, got {radix_width}")));
        }
        let w = radix_width as u32;
        let key_bits = (2 * grid.max_level as u32).div_ceil(w) * w;
        Ok(Self {
            grid,
            radix_width,
            key_bits,
            root_terms: Vec::new(),
            nodes: vec![Node::new(1 << radix_width)],
            term_lists: Vec::new(),
            num_cells: 0,
        })
    }

    pub fn grid(&self) -> &GridConfig<T> {
        &self.grid
    }

    pub fn radix_width(&self) -> u8 {
        self.radix_width
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of inserted (cell, entry) pairs.
    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        let fanout = 1usize << self.radix_width;
        let node = std::mem::size_of::<Node>() + 2 * fanout * std::mem::size_of::<u32>();
        let terms: usize = self
            .term_lists
            .iter()
            .map(|l| std::mem::size_of::<Vec<Hit>>() + l.capacity() * std::mem::size_of::<Hit>())
            .sum();
        self.nodes.len() * node + terms + self.root_terms.capacity() * std::mem::size_of::<Hit>()
    }

    #[inline]
    fn chunk(&self, key: u64, depth: u32) -> usize {
        let w = self.radix_width as u32;
        ((key >> (self.key_bits - (depth + 1) * w)) & ((1u64 << w) - 1)) as usize
    }

    /// Record `hit` for `cell`. Call [`finish`](Self::finish) after the last insert.
    pub fn insert(&mut self, cell: CellId, hit: Hit) {
        debug_assert!(cell.level <= self.grid.max_level);
        self.num_cells += 1;
        if cell.level == 0 {
            self.root_terms.push(hit);
            return;
        }
        let w = self.radix_width as u32;
        let bits = 2 * cell.level as u32;
        let depth = (bits - 1) / w;
        let rem = bits - depth * w;
        let key = cell.code << (self.key_bits - bits);
        let fanout = 1usize << w;
        let mut node = 0usize;
        for d in 0..depth {
            let slot = self.chunk(key, d);
            let next = self.nodes[node].children[slot];
            node = if next == NONE {
                let id = self.nodes.len();
                self.nodes.push(Node::new(fanout));
                self.nodes[node].children[slot] = id as u32;
                id
            } else {
                next as usize
            };
        }
        let base = self.chunk(key, depth);
        for slot in base..base + (1usize << (w - rem)) {
            let mut t = self.nodes[node].terms[slot];
            if t == NONE {
                t = self.term_lists.len() as u32;
                self.term_lists.push(Vec::new());
                self.nodes[node].terms[slot] = t;
            }
            self.term_lists[t as usize].push(hit);
        }
    }

    /// Sort and deduplicate terminal lists (set semantics, order independence).
    pub fn finish(&mut self) {
        self.root_terms.sort_unstable();
        self.root_terms.dedup();
        for l in &mut self.term_lists {
            l.sort_unstable();
            l.dedup();
        }
    }

    /// All entries on the path of leaf code `code`, with the number of nodes
    /// visited.
    pub fn lookup_code_with_depth(&self, code: u64) -> (Vec<Hit>, usize) {
        let mut out = self.root_terms.clone();
        let key = code << (self.key_bits - 2 * self.grid.max_level as u32);
        let mut node = 0usize;
        let mut visited = 0;
        let levels = self.key_bits / self.radix_width as u32;
        for d in 0..levels {
            visited += 1;
            let n = &self.nodes[node];
            let slot = self.chunk(key, d);
            if n.terms[slot] != NONE {
                out.extend_from_slice(&self.term_lists[n.terms[slot] as usize]);
            }
            if n.children[slot] == NONE {
                break;
            }
            node = n.children[slot] as usize;
        }
        out.sort_unstable();
        out.dedup();
        (out, visited)
    }

    pub fn lookup_code(&self, code: u64) -> Vec<Hit> {
        self.lookup_code_with_depth(code).0
    }

    /// Visit every entry on the path of `code` without allocating.
    #[inline]
    pub fn for_each_hit<F: FnMut(Hit)>(&self, code: u64, mut f: F) {
        for h in &self.root_terms {
            f(*h);
        }
        let key = code << (self.key_bits - 2 * self.grid.max_level as u32);
        let mut node = 0usize;
        let levels = self.key_bits / self.radix_width as u32;
        for d in 0..levels {
            let n = &self.nodes[node];
            let slot = self.chunk(key, d);
            if n.terms[slot] != NONE {
                for h in &self.term_lists[n.terms[slot] as usize] {
                    f(*h);
                }
            }
            if n.children[slot] == NONE {
                break;
            }
            node = n.children[slot] as usize;
        }
    }

    pub fn lookup(&self, p: &Point2D<T>) -> Result<Vec<Hit>> {
        Ok(self.lookup_code(self.grid.leaf_code(p)?))
    }

    /// Binary form: magic, version, radix width, grid, root entries, then the
    /// node tree in preorder. All integers little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.radix_width, self.grid.max_level])?;
        for v in [self.grid.origin.x, self.grid.origin.y, self.grid.extent] {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
        w.write_all(&(self.num_cells as u64).to_le_bytes())?;
        write_hits(w, &self.root_terms)?;
        self.write_node(w, 0)
    }

    fn write_node<W: Write>(&self, w: &mut W, id: usize) -> Result<()> {
        let n = &self.nodes[id];
        for slot in 0..n.children.len() {
            let flags = (n.children[slot] != NONE) as u8 | (((n.terms[slot] != NONE) as u8) << 1);
            w.write_all(&[flags])?;
            if n.terms[slot] != NONE {
                write_hits(w, &self.term_lists[n.terms[slot] as usize])?;
            }
        }
        for &c in n.children.iter().filter(|&&c| c != NONE) {
            self.write_node(w, c as usize)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a cell trie file".into()));
        }
        let version = u16::from_le_bytes(read_arr(r)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported trie version {version}")));
        }
        let [radix_width, max_level] = read_arr::<_, 2>(r)?;
        let mut f = [0f64; 3];
        for v in &mut f {
            *v = f64::from_le_bytes(read_arr(r)?);
        }
        let grid = GridConfig::new(Point2D::new(T::lit(f[0]), T::lit(f[1])), T::lit(f[2]), max_level)?;
        let mut t = Self::new(grid, radix_width)?;
        t.num_cells = u64::from_le_bytes(read_arr(r)?) as usize;
        t.root_terms = read_hits(r)?;
        t.read_node(r, 0, 0)?;
        Ok(t)
    }

    fn read_node<R: Read>(&mut self, r: &mut R, id: usize, depth: u32) -> Result<()> {
        if depth * self.radix_width as u32 >= self.key_bits.max(1) {
            return Err(Error::Format("trie deeper than its key width".into()));
        }
        let fanout = 1usize << self.radix_width;
        let mut with_child = Vec::new();
        for slot in 0..fanout {
            let [flags] = read_arr::<_, 1>(r)?;
            if flags & 2 != 0 {
                let hits = read_hits(r)?;
                self.nodes[id].terms[slot] = self.term_lists.len() as u32;
                self.term_lists.push(hits);
            }
            if flags & 1 != 0 {
                with_child.push(slot);
            }
        }
        for slot in with_child {
            let child = self.nodes.len();
            self.nodes.push(Node::new(fanout));
            self.nodes[id].children[slot] = child as u32;
            self.read_node(r, child, depth + 1)?;
        }
        Ok(())
    }
}

fn write_hits<W: Write>(w: &mut W, hits: &[Hit]) -> Result<()> {
    w.write_all(&(hits.len() as u32).to_le_bytes())?;
    for h in hits {
        w.write_all(&h.region_id.to_le_bytes())?;
        w.write_all(&[(h.kind == CellKind::Boundary) as u8])?;
    }
    Ok(())
}

fn read_hits<R: Read>(r: &mut R) -> Result<Vec<Hit>> {
    let n = u32::from_le_bytes(read_arr(r)?) as usize;
    let mut v = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let region_id = u64::from_le_bytes(read_arr(r)?);
        let kind = match read_arr::<_, 1>(r)? {
            [0] => CellKind::Interior,
            [1] => CellKind::Boundary,
            [k] => return Err(Error::Format(format!("bad cell kind {k}"))),
        };
        v.push(Hit { region_id, kind });
    }
    Ok(v)
}

pub(crate) fn read_arr<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Polygon, RegionRecord};
    use crate::raster::{cover_region_at_level, RasterMode};
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn covering(id: u64, poly: Polygon<f64>, level: u8) -> RasterApprox<f64> {
        let g = GridConfig::unit(level).unwrap();
        cover_region_at_level(&RegionRecord::new(id, poly), &g, RasterMode::Conservative).unwrap()
    }

    #[test]
    fn root_cell_only() {
        let c = covering(3, Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap(), 6);
        let t = act_build(&[c], 8).unwrap();
        assert_eq!(t.num_cells(), 1);
        assert_eq!(t.num_nodes(), 1);
        for p in [(0.0, 0.0), (0.5, 0.9), (0.999, 0.2)] {
            let hits = t.lookup(&Point2D::new(p.0, p.1)).unwrap();
            assert_eq!(hits, vec![Hit { region_id: 3, kind: CellKind::Interior }]);
        }
    }

    #[test]
    fn empty_trie() {
        let t = AdaptiveCellTrie::new(GridConfig::<f64>::unit(5).unwrap(), 4).unwrap();
        assert!(t.lookup(&Point2D::new(0.3, 0.3)).unwrap().is_empty());
        assert!(t.lookup(&Point2D::new(1.3, 0.3)).is_err());
    }

    #[test]
    fn left_right_halves() {
        let l = covering(1, Polygon::rect(0.0, 0.0, 0.5, 1.0).unwrap(), 4);
        let r = covering(2, Polygon::rect(0.5, 0.0, 1.0, 1.0).unwrap(), 4);
        for w in [2, 4, 8] {
            let t = act_build(&[l.clone(), r.clone()], w).unwrap();
            assert_eq!(t.lookup(&Point2D::new(0.25, 0.7)).unwrap()[0].region_id, 1);
            assert_eq!(t.lookup(&Point2D::new(0.75, 0.1)).unwrap()[0].region_id, 2);
            assert_eq!(t.lookup(&Point2D::new(0.75, 0.1)).unwrap().len(), 1);
        }
    }

    #[test]
    fn duplicate_insert_is_idempotent() {
        let g = GridConfig::<f64>::unit(4).unwrap();
        let mut t = AdaptiveCellTrie::new(g, 4).unwrap();
        let h = Hit { region_id: 9, kind: CellKind::Boundary };
        let c = CellId::new(4, 77).unwrap();
        t.insert(c, h);
        t.insert(c, h);
        t.finish();
        assert_eq!(t.lookup_code(77), vec![h]);
    }

    #[test]
    fn bad_config() {
        let g = GridConfig::<f64>::unit(4).unwrap();
        assert!(AdaptiveCellTrie::new(g, 3).is_err());
        let a = covering(1, Polygon::rect(0.1, 0.1, 0.4, 0.4).unwrap(), 4);
        let b = covering(2, Polygon::rect(0.1, 0.1, 0.4, 0.4).unwrap(), 5);
        assert!(matches!(act_build(&[a, b], 8), Err(Error::Config(_))));
    }

    #[test]
    fn depth_bound_and_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let level = 9;
        let covs: Vec<_> = (0..30)
            .map(|i| covering(i, crate::synth::random_polygon(&mut rng, 0.05, 0.25, 10, i % 3 == 0), level))
            .collect();
        for w in [2u8, 4, 8] {
            let t = act_build(&covs, w).unwrap();
            for cov in &covs {
                for c in cov.cells() {
                    let leaf = c.cell.interval(level).lo;
                    let (hits, visited) = t.lookup_code_with_depth(leaf);
                    assert!(hits.contains(&Hit { region_id: cov.region_id(), kind: c.kind }));
                    let bound = (2 * c.cell.level as usize).div_ceil(w as usize);
                    // the cell's entry sits at depth `bound`; the walk may continue deeper
                    assert!(visited >= bound);
                }
            }
            for _ in 0..5000 {
                let code = rng.gen_range(0..1u64 << (2 * level));
                let brute: Vec<Hit> = {
                    let mut v: Vec<_> = covs
                        .iter()
                        .filter_map(|c| {
                            c.lookup_code(code).map(|kind| Hit { region_id: c.region_id(), kind })
                        })
                        .collect();
                    v.sort_unstable();
                    v
                };
                assert_eq!(t.lookup_code(code), brute);
            }
        }
    }

    #[test]
    fn terminal_depth_matches_level() {
        // a single cell must be discoverable within ceil(2l/w) node visits
        let g = GridConfig::<f64>::unit(12).unwrap();
        for w in [2u8, 4, 8] {
            for level in 1..=12u8 {
                let mut t = AdaptiveCellTrie::new(g, w).unwrap();
                let cell = CellId::new(level, (1u64 << (2 * level)) - 2).unwrap();
                t.insert(cell, Hit { region_id: 0, kind: CellKind::Interior });
                t.finish();
                let (hits, visited) = t.lookup_code_with_depth(cell.interval(12).lo);
                assert_eq!(hits.len(), 1);
                assert_eq!(visited, (2 * level as usize).div_ceil(w as usize));
            }
        }
    }

    #[test]
    fn build_order_independent_and_serializable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut covs: Vec<_> = (0..10)
            .map(|i| covering(i, crate::synth::random_polygon(&mut rng, 0.05, 0.3, 8, false), 7))
            .collect();
        let a = act_build(&covs, 4).unwrap();
        covs.shuffle(&mut rng);
        let b = act_build(&covs, 4).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let c = AdaptiveCellTrie::<f64>::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(c.num_cells(), a.num_cells());
        for code in 0..1u64 << 14 {
            let x = a.lookup_code(code);
            assert_eq!(x, b.lookup_code(code));
            assert_eq!(x, c.lookup_code(code));
        }
        buf[0] = b'X';
        assert!(matches!(AdaptiveCellTrie::<f64>::read_from(&mut buf.as_slice()), Err(Error::Format(_))));
    }
}
