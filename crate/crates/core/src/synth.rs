//! Seeded synthetic workloads: star-shaped random polygons (optionally with a
//! hole), uniform and clustered points. All coordinates land in `[0, 1)`.

use crate::geometry::{point_segment_distance, Point2D, PointDataset, PointRecord, Polygon, RegionRecord};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Star-shaped polygon around a random center with radii in `[r_min, r_max]`.
///
/// Vertex angles are sorted, so the ring is simple. With `with_hole`, a second
/// star polygon well inside the kernel is added as a hole.
pub fn random_polygon<T: Scalar, R: Rng>(
    rng: &mut R,
    r_min: f64,
    r_max: f64,
    max_vertices: usize,
    with_hole: bool,
) -> Polygon<T> {
    let n = rng.gen_range(5..=max_vertices.max(5));
    let cx = rng.gen_range(r_max..1.0 - r_max);
    let cy = rng.gen_range(r_max..1.0 - r_max);
    // Jittered angles keep every angular gap below pi.
    let base: f64 = rng.gen::<f64>() * TAU;
    let star = |rng: &mut R, k: usize, lo: f64, hi: f64| -> Vec<Point2D<T>> {
        (0..k)
            .map(|i| {
                let a = base + TAU * (i as f64 + rng.gen_range(0.0..0.5)) / k as f64;
                let r = rng.gen_range(lo..=hi);
                Point2D::new(T::lit(cx + r * a.cos()), T::lit(cy + r * a.sin()))
            })
            .collect()
    };
    let outer = star(rng, n, r_min, r_max);
    let holes = if with_hole {
        let c = Point2D::new(T::lit(cx), T::lit(cy));
        let m = outer.len();
        let kernel = (0..m)
            .map(|i| point_segment_distance(&c, &outer[i], &outer[(i + 1) % m]).as_f64())
            .fold(f64::INFINITY, f64::min);
        let hr = kernel * 0.5;
        let k = rng.gen_range(4..=6);
        vec![star(rng, k, hr * 0.4, hr)]
    } else {
        Vec::new()
    };
    Polygon::new(outer, holes).expect("star-shaped polygon is simple")
}

/// `count` regions with ids `0..count`.
pub fn random_regions<T: Scalar, R: Rng>(
    rng: &mut R,
    count: usize,
    r_min: f64,
    r_max: f64,
    max_vertices: usize,
) -> Vec<RegionRecord<T>> {
    (0..count)
        .map(|i| {
            let hole = rng.gen_bool(0.25);
            RegionRecord::new(i as u64, random_polygon(rng, r_min, r_max, max_vertices, hole))
        })
        .collect()
}

/// Uniform points in `[0, 1)^2`; draws that round up to 1 in `T` are redrawn.
pub fn uniform_points<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> Vec<Point2D<T>> {
    let coord = |rng: &mut R| loop {
        let v = T::lit(rng.gen());
        if v < T::one() {
            return v;
        }
    };
    (0..n).map(|_| Point2D::new(coord(rng), coord(rng))).collect()
}

/// Gaussian-ish clusters (sum of uniforms) mixed with 20% uniform noise, with
/// one non-negative attribute `fare`.
pub fn clustered_points<T: Scalar, R: Rng>(rng: &mut R, n: usize, clusters: usize) -> PointDataset<T> {
    let centers: Vec<(f64, f64, f64)> = (0..clusters.max(1))
        .map(|_| (rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.02..0.12)))
        .collect();
    let mut recs = Vec::with_capacity(n);
    while recs.len() < n {
        let (x, y) = if rng.gen_bool(0.2) {
            (rng.gen::<f64>(), rng.gen::<f64>())
        } else {
            let (cx, cy, s) = centers[rng.gen_range(0..centers.len())];
            let g = |rng: &mut R| (0..4).map(|_| rng.gen::<f64>() - 0.5).sum::<f64>();
            (cx + s * g(rng), cy + s * g(rng))
        };
        let (x, y) = (T::lit(x), T::lit(y));
        if x < T::zero() || x >= T::one() || y < T::zero() || y >= T::one() {
            continue;
        }
        let fare = (rng.gen::<f64>() * 40.0 + 2.5).round() / 2.0;
        recs.push(PointRecord::new(Point2D::new(x, y), vec![fare]));
    }
    PointDataset::new(vec!["fare".to_string()], recs).expect("schema is consistent")
}

/// Seeded benchmark workload: clustered points and random regions.
pub fn workload<T: Scalar>(
    seed: u64,
    n_points: usize,
    n_regions: usize,
) -> (PointDataset<T>, Vec<RegionRecord<T>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regions = random_regions(&mut rng, n_regions, 0.03, 0.25, 16);
    let points = clustered_points(&mut rng, n_points, 8);
    (points, regions)
}

