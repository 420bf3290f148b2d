//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use epsraster::geometry::{distance_to_boundary, hausdorff_distance, lattice_sample, point_in_polygon, Mbr};
use epsraster::grid::{cell_interval, level_for_bound, point_to_cell, z_encode};
use epsraster::pointindex::{bounds_lookup, lps_build, rs_build, DEFAULT_MAX_ERROR, DEFAULT_RADIX_BITS};
use epsraster::query::{join_act, join_canvas, join_pointindex};
use epsraster::raster::{approx_contains, rasterize_hierarchical, rasterize_region};
use epsraster::synth::{clustered_points, random_polygon, random_regions, uniform_points};
use epsraster::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

type Outcome = std::result::Result<String, String>;
type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn unit() -> GridConfig<f64> {
    GridConfig::unit(0).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Polygons and points shared by the first two criteria.
struct Suite {
    polys: Vec<(Polygon<f64>, f64)>,
    points: Vec<Point2D<f64>>,
}

fn suite() -> Suite {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let polys = (0..100)
        .map(|i| {
            let p = random_polygon(&mut rng, 0.05, 0.35, 16, i % 4 == 0);
            let eps = [0.004, 0.01, 0.025, 0.06][i % 4];
            (p, eps)
        })
        .collect();
    Suite { polys, points: uniform_points(&mut rng, 100_000) }
}

/// Every point the covering gets wrong lies within the bound of the boundary.
fn criterion_1(s: &Suite) -> Outcome {
    let t0 = Instant::now();
    let mut wrong = 0u64;
    let mut checked = 0u64;
    for (i, (poly, eps)) in s.polys.iter().enumerate() {
        for mode in [RasterMode::Conservative, RasterMode::CenterSampled] {
            let r = rasterize_hierarchical(poly, &unit(), *eps, mode).map_err(|e| e.to_string())?;
            for p in &s.points {
                checked += 1;
                let approx = approx_contains(&r, p).map_err(|e| e.to_string())?;
                if approx != point_in_polygon(p, poly) {
                    wrong += 1;
                    let d = distance_to_boundary(p, poly);
                    ensure(d <= *eps, || {
                        format!("polygon {i} {mode}: {p:?} misclassified at distance {d} > {eps}")
                    })?;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{checked} tests, {wrong} misclassified, all within the bound, {secs:.1}s"))
}

/// Conservative coverings have no false negatives.
fn criterion_2(s: &Suite) -> Outcome {
    let mut inside = 0u64;
    for (i, (poly, eps)) in s.polys.iter().enumerate() {
        let r = rasterize_hierarchical(poly, &unit(), *eps, RasterMode::Conservative).map_err(|e| e.to_string())?;
        for p in &s.points {
            if point_in_polygon(p, poly) {
                inside += 1;
                ensure(approx_contains(&r, p).unwrap(), || format!("polygon {i}: false negative at {p:?}"))?;
            }
        }
    }
    Ok(format!("0 false negatives over {inside} inside points"))
}

/// Sampled Hausdorff distance between polygon and covering.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let poly: Polygon<f64> = random_polygon(&mut rng, 0.08, 0.35, 14, i % 3 == 0);
        let eps = [0.01, 0.02, 0.04][i % 3];
        let step = eps / 10.0;
        let r = rasterize_hierarchical(&poly, &unit(), eps, RasterMode::Conservative).map_err(|e| e.to_string())?;
        let g = r.grid();
        let mut bounds: Option<Mbr<f64>> = None;
        for c in r.cells() {
            let (lo, hi) = g.cell_bounds(c.cell);
            let m = Mbr { min: lo, max: hi };
            bounds = Some(bounds.map_or(m, |b| b.union(&m)));
        }
        let bounds = bounds.ok_or_else(|| format!("polygon {i}: empty covering"))?;
        let a = lattice_sample(&poly.mbr(), step, |p| point_in_polygon(p, &poly));
        let b = lattice_sample(&bounds, step, |p| approx_contains(&r, p).unwrap());
        let d = hausdorff_distance(&a, &b).map_err(|e| format!("polygon {i}: {e}"))?;
        let limit = eps + step * std::f64::consts::SQRT_2;
        ensure(d <= limit, || format!("polygon {i}: d_H {d} > {limit}"))?;
        worst = worst.max(d / eps);
    }
    Ok(format!("50 polygons, worst d_H = {worst:.3} eps"))
}

struct Workload {
    points: PointDataset<f64>,
    regions: Vec<RegionRecord<f64>>,
    query: AggregationQuery<f64>,
    opts: JoinOptions,
}

fn workload(seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let n_regions = rng.gen_range(1..=12);
    let regions = random_regions(&mut rng, n_regions, 0.03, 0.3, 14);
    let (n, k) = (rng.gen_range(500..5_000), rng.gen_range(1..6));
    let points = clustered_points(&mut rng, n, k);
    let level = rng.gen_range(3..=9u32);
    let eps = std::f64::consts::SQRT_2 / (1u64 << level) as f64 * rng.gen_range(1.0..1.9);
    let mode = if seed.is_multiple_of(2) { RasterMode::Conservative } else { RasterMode::CenterSampled };
    let opts = JoinOptions { canvas_log2: if seed.is_multiple_of(3) { 4 } else { 13 }, ..JoinOptions::default() };
    Workload { points, regions, query: AggregationQuery::new(Aggregate::Count, eps, mode).unwrap(), opts }
}

fn run_engines(w: &Workload) -> std::result::Result<[Vec<RegionResult>; 3], String> {
    let g = unit();
    let level = level_for_bound(&g, w.query.epsilon).map_err(|e| e.to_string())?;
    let lps = lps_build(&w.points, &g.with_level(level), &[]).map_err(|e| e.to_string())?;
    let rs = rs_build(&lps, (2 * level).min(DEFAULT_RADIX_BITS), DEFAULT_MAX_ERROR).map_err(|e| e.to_string())?;
    let e = |e: Error| e.to_string();
    Ok([
        join_act(&w.points, &w.regions, &g, &w.query, &w.opts).map_err(e)?,
        join_pointindex(&lps, Some(&rs), &w.regions, &w.query, &w.opts).map_err(e)?,
        join_canvas(&w.points, &w.regions, &g, &w.query, &w.opts).map_err(e)?,
    ])
}

/// The three engines agree exactly on COUNT.
fn criterion_4() -> Outcome {
    let mut regions = 0;
    let mut tiled = 0;
    for seed in 0..100 {
        let w = workload(seed);
        if w.opts.canvas_log2 < level_for_bound(&unit(), w.query.epsilon).unwrap() {
            tiled += 1;
        }
        let [a, p, c] = run_engines(&w)?;
        for ((x, y), z) in a.iter().zip(&p).zip(&c) {
            let key = |r: &RegionResult| (r.region_id, r.alpha_part.count, r.beta_part.count);
            ensure(key(x) == key(y) && key(x) == key(z), || {
                format!("workload {seed}: act {:?} pointindex {:?} canvas {:?}", key(x), key(y), key(z))
            })?;
            regions += 1;
        }
    }
    Ok(format!("100 workloads, {regions} regions identical across engines ({tiled} tiled canvas runs)"))
}

/// The exact count lies in the reported range.
fn criterion_5() -> Outcome {
    let mut regions = 0;
    let mut exact_hits = 0;
    for seed in 0..100 {
        let mut w = workload(seed);
        w.query.mode = RasterMode::Conservative;
        let [a, ..] = run_engines(&w)?;
        for (r, rr) in w.regions.iter().zip(&a) {
            let exact = w.points.records().iter().filter(|p| r.contains(&p.loc)).count() as f64;
            let (lo, hi) = rr.range.ok_or("conservative COUNT without a range")?;
            ensure(lo <= exact && exact <= hi, || {
                format!("workload {seed} region {}: exact {exact} outside [{lo}, {hi}]", r.id)
            })?;
            regions += 1;
            exact_hits += (lo == hi) as u32;
        }
    }
    Ok(format!("{regions} regions, exact count always in [alpha-beta, alpha] ({exact_hits} with beta=0)"))
}

/// Learned index lookups equal binary search, and the spline error bound holds.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ds: PointDataset<f64> = clustered_points(&mut rng, 1_000_000, 12);
    let level = 20;
    let lps = lps_build(&ds, &unit().with_level(level), &[]).map_err(|e| e.to_string())?;
    let rs = rs_build(&lps, DEFAULT_RADIX_BITS, DEFAULT_MAX_ERROR).map_err(|e| e.to_string())?;
    let codes = lps.codes();
    let tau = DEFAULT_MAX_ERROR as u64;
    for (i, &k) in codes.iter().enumerate() {
        if i > 0 && codes[i - 1] == k {
            continue;
        }
        ensure(rs.prediction_within(k, i as u64, tau), || format!("key {k} at {i}: error above {tau}"))?;
    }
    let oracle = |key: u64| codes.partition_point(|&c| c < key);
    for j in 0..1_000_000 {
        let iv = if j % 2 == 0 {
            let l = rng.gen_range(0..=level);
            let c = CellId { level: l, code: rng.gen_range(0..1u64 << (2 * l as u32)) };
            cell_interval(c, level)
        } else {
            let a = codes[rng.gen_range(0..codes.len())];
            let b = a.saturating_add(rng.gen_range(0..1u64 << 16)).min(1 << (2 * level));
            CellInterval { lo: a, hi: b }
        };
        let got = bounds_lookup(&lps, Some(&rs), iv);
        ensure(got == (oracle(iv.lo), oracle(iv.hi)), || format!("interval {iv:?}: {got:?}"))?;
    }
    Ok(format!(
        "{} keys, {} knots, {} radix bits used; 10^6 intervals match binary search; error <= {tau}",
        codes.len(),
        rs.knots().len(),
        rs.radix_bits()
    ))
}

/// Cell membership is the same as interval membership, exhaustively.
fn criterion_7() -> Outcome {
    let mut checks = 0u64;
    for big_l in 0..=5u8 {
        let g = unit().with_level(big_l);
        let n = 1u32 << big_l;
        for l in 0..=big_l {
            for code in 0..1u64 << (2 * l as u32) {
                let c = CellId { level: l, code };
                let iv = cell_interval(c, big_l);
                for ix in 0..n {
                    for iy in 0..n {
                        let leaf = z_encode(ix, iy, big_l).unwrap();
                        let side = 1.0 / n as f64;
                        // Lower-left corner and center of the leaf.
                        for (fx, fy) in [(0.0, 0.0), (0.5, 0.5)] {
                            let p = Point2D::new((ix as f64 + fx) * side, (iy as f64 + fy) * side);
                            let member = g.cell_contains(c, &p);
                            let code_in = iv.contains(point_to_cell(&g, &p, big_l).unwrap().code);
                            ensure(member == code_in && member == iv.contains(leaf.code), || {
                                format!("L={big_l} cell {c:?} leaf ({ix},{iy})")
                            })?;
                            checks += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checks} cell/leaf pairs agree for L <= 5"))
}

/// Conservative counts shrink as the bound halves and reach the exact count.
fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let regions: Vec<RegionRecord<f64>> = random_regions(&mut rng, 10, 0.05, 0.3, 14);
    let ds: PointDataset<f64> = clustered_points(&mut rng, 50_000, 6);
    let finest = 20u8;
    let lps = lps_build(&ds, &unit().with_level(finest), &[]).map_err(|e| e.to_string())?;
    let exact: Vec<u64> =
        regions.iter().map(|r| ds.records().iter().filter(|p| r.contains(&p.loc)).count() as u64).collect();
    let mut prev: Option<Vec<u64>> = None;
    let mut trace = Vec::new();
    for level in 2..=finest {
        let eps = std::f64::consts::SQRT_2 / (1u64 << level) as f64;
        let q = AggregationQuery::new(Aggregate::Count, eps, RasterMode::Conservative).unwrap();
        let res = join_pointindex(&lps, None, &regions, &q, &JoinOptions::default()).map_err(|e| e.to_string())?;
        let alpha: Vec<u64> = res.iter().map(|r| r.alpha_part.count).collect();
        if let Some(p) = &prev {
            for (i, (a, b)) in p.iter().zip(&alpha).enumerate() {
                ensure(b <= a, || format!("region {i}: alpha grew from {a} to {b} at level {level}"))?;
            }
        }
        for (a, e) in alpha.iter().zip(&exact) {
            ensure(a >= e, || format!("conservative alpha {a} below exact {e}"))?;
        }
        trace.push(alpha.iter().sum::<u64>());
        prev = Some(alpha);
    }
    let total_exact: u64 = exact.iter().sum();
    let last = *trace.last().unwrap();
    ensure(last == total_exact, || format!("finest alpha {last} != exact {total_exact}"))?;
    Ok(format!(
        "total alpha {} -> {} -> {} -> {} (exact {total_exact}) over levels 2, 6, 10, {finest}",
        trace[0], trace[4], trace[8], last
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Desk-scale error trend on 10^6 points, and exactness for dyadic rectangles.
fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ds: PointDataset<f64> = clustered_points(&mut rng, 1_000_000, 10);
    let g = unit();
    let regions: Vec<RegionRecord<f64>> = random_regions(&mut rng, 20, 0.05, 0.3, 14);
    let exact: Vec<f64> =
        regions.iter().map(|r| ds.records().iter().filter(|p| r.contains(&p.loc)).count() as f64).collect();
    let coarse = 0.02;
    let fine = 0.005;
    let mut medians = Vec::new();
    for eps in [coarse, fine] {
        let q = AggregationQuery::new(Aggregate::Count, eps, RasterMode::Conservative).unwrap();
        let opts = JoinOptions { parallel: true, ..JoinOptions::default() };
        let res = join_act(&ds, &regions, &g, &q, &opts).map_err(|e| e.to_string())?;
        let errs: Vec<f64> = res
            .iter()
            .zip(&exact)
            .filter(|(_, &e)| e > 0.0)
            .map(|(r, &e)| (r.alpha.unwrap() - e).abs() / e)
            .collect();
        medians.push(median(errs));
    }
    ensure(medians[1] <= medians[0], || format!("median error {} at {fine} > {} at {coarse}", medians[1], medians[0]))?;

    // Rectangles on the level-7 grid; the bound is that level's leaf diagonal.
    let level = 7u32;
    let n = 1u32 << level;
    let side = 1.0 / n as f64;
    let rects: Vec<RegionRecord<f64>> = (0..20)
        .map(|i| {
            let x0 = rng.gen_range(0..n - 1);
            let y0 = rng.gen_range(0..n - 1);
            let x1 = rng.gen_range(x0 + 1..=n);
            let y1 = rng.gen_range(y0 + 1..=n);
            let p = Polygon::rect(x0 as f64 * side, y0 as f64 * side, x1 as f64 * side, y1 as f64 * side).unwrap();
            RegionRecord::new(i, p)
        })
        .collect();
    let eps = side * std::f64::consts::SQRT_2;
    let q = AggregationQuery::new(Aggregate::Count, eps, RasterMode::Conservative).unwrap();
    let res = join_act(&ds, &rects, &g, &q, &JoinOptions { parallel: true, ..JoinOptions::default() })
        .map_err(|e| e.to_string())?;
    for (r, rr) in rects.iter().zip(&res) {
        // Half-open oracle: the rectangles share edges with cells.
        let (lo, hi) = (r.mbr().min, r.mbr().max);
        let exact = ds
            .records()
            .iter()
            .filter(|p| p.loc.x >= lo.x && p.loc.x < hi.x && p.loc.y >= lo.y && p.loc.y < hi.y)
            .count() as f64;
        ensure(rr.alpha == Some(exact) && rr.beta == Some(0.0), || {
            format!("dyadic rectangle {}: alpha {:?} beta {:?} exact {exact}", r.id, rr.alpha, rr.beta)
        })?;
        let cov = rasterize_region(r, &g, eps, RasterMode::Conservative).map_err(|e| e.to_string())?;
        ensure(cov.boundary().next().is_none(), || format!("rectangle {} has boundary cells", r.id))?;
    }
    Ok(format!(
        "median relative error {:.4} at eps={coarse}, {:.4} at eps={fine}; 20 dyadic rectangles exact",
        medians[0], medians[1]
    ))
}

fn main() {
    // `cargo test` passes harness flags; a name filter selects criteria.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());

    let needs_suite = wanted(1) || wanted(2);
    let s = needs_suite.then(suite);
    let criteria: Vec<Criterion> = vec![
        (1, "distance-bound soundness", Box::new(|| criterion_1(s.as_ref().unwrap()))),
        (2, "conservative completeness", Box::new(|| criterion_2(s.as_ref().unwrap()))),
        (3, "sampled Hausdorff bound", Box::new(criterion_3)),
        (4, "engine equivalence", Box::new(criterion_4)),
        (5, "result-range soundness", Box::new(criterion_5)),
        (6, "learned-index fidelity", Box::new(criterion_6)),
        (7, "z-order interval correctness", Box::new(criterion_7)),
        (8, "precision trend", Box::new(criterion_8)),
        (9, "desk-scale error trend", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, name, run) in &criteria {
        if !wanted(*n) {
            continue;
        }
        let t0 = Instant::now();
        let out = run();
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {msg}");
            }
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
