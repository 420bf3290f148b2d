//! Distance-bounded raster approximations of polygons and the spatial
//! aggregation engines built on them.
//!
//! Polygons are approximated by quadtree cells whose leaf diagonal is at most
//! a user bound `epsilon`. Every misclassified point is then within
//! `epsilon` of the polygon boundary, which lets aggregation skip exact
//! point-in-polygon tests entirely. Cells are linearized with Z-order codes
//! so they can be indexed by a trie ([`act`]) or matched against a sorted
//! point array ([`pointindex`]), or drawn onto pixel canvases ([`canvas`]).
//!
//! The library is generic over the coordinate type; `f64` and `f32`
//! aliases are provided below.

pub mod act;
pub mod aggregate;
pub mod canvas;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod pointindex;
pub mod query;
pub mod raster;
pub mod scalar;
pub mod synth;

pub use aggregate::{Aggregate, AttrFilter, Partial};
pub use error::{Error, Result};
pub use geometry::{Point2D, PointDataset, PointRecord, Polygon, RegionRecord};
pub use grid::{CellId, CellInterval, GridConfig};
pub use query::{AggregationQuery, JoinOptions, RegionResult};
pub use raster::{CellKind, RasterMode};
pub use scalar::Scalar;

pub type Point2D64 = Point2D<f64>;
pub type Point2D32 = Point2D<f32>;
pub type Polygon64 = Polygon<f64>;
pub type Polygon32 = Polygon<f32>;
pub type GridConfig64 = GridConfig<f64>;
pub type GridConfig32 = GridConfig<f32>;
pub type RasterApprox64 = raster::RasterApprox<f64>;
pub type RasterApprox32 = raster::RasterApprox<f32>;
pub type PointDataset64 = PointDataset<f64>;
pub type RegionRecord64 = RegionRecord<f64>;
pub type Canvas64 = canvas::Canvas<f64>;
