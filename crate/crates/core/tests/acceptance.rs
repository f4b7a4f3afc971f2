//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits nonzero if any
//! criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fixture_bytes, gaussian_cluster, mixed_points, unit_points};
use scatterquery_core::ingest::{classify_attributes, enumerate_pairwise, load_table};
use scatterquery_core::representation::{block_downsample, build_pyramid, to_density};
use scatterquery_core::scoring::{default_weights, emd_exact, mld, region_score};
use scatterquery_core::service::{
    build_collection, execute_query, load_dataset, CollectionRequest, QueryRequest, ServiceConfig,
};
use scatterquery_core::{
    Collection, Column, CsvFormat, HeatmapKind, HeatmapLevel, HeatmapPyramid, Point,
    PreprocessConfig, PyramidConfig, Region, SimilarityQuery, Table, TopK, WeightSchedule,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str, limit: Duration, check: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(note) if elapsed > limit => Err(format!("{note}; exceeded {limit:?}")),
        other => other,
    };
    let (tag, note) = match &outcome {
        Ok(n) => ("PASS", n),
        Err(n) => ("FAIL", n),
    };
    println!("{tag} {name:<24} {:>9.1?} {note}", elapsed);
    outcome.is_ok()
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("enumeration", Duration::from_secs(1), enumeration),
        (
            "pyramid-conservation",
            Duration::from_secs(10),
            pyramid_conservation,
        ),
        (
            "mld-pseudometric",
            Duration::from_secs(30),
            mld_pseudometric,
        ),
        ("region-oracle", Duration::from_secs(10), region_oracle),
        ("emd-oracle", Duration::from_secs(60), emd_oracle),
        ("separation", Duration::from_secs(60), separation),
        (
            "pruning-soundness",
            Duration::from_secs(30),
            pruning_soundness,
        ),
        ("query-latency", Duration::from_secs(60), query_latency),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let failed = criteria
        .iter()
        .filter(|(name, limit, check)| !run(name, *limit, *check))
        .count();
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

/// `columns` continuous measures plus one text column that must never be
/// paired.
fn numeric_table(columns: usize, rows: usize, rng: &mut impl Rng) -> Table {
    let mut cols: Vec<(String, Column)> = (0..columns)
        .map(|c| {
            let values = (0..rows)
                .map(|_| Some(rng.random::<f64>() * 100.0))
                .collect();
            (format!("m{c:02}"), Column::Numeric(values))
        })
        .collect();
    let labels = (0..rows).map(|r| Some(format!("g{}", r % 3))).collect();
    cols.push(("label".into(), Column::Text(labels)));
    Table::new("generated", cols).unwrap()
}

fn enumeration() -> Outcome {
    let table = load_table(
        "communities",
        fixture_bytes("communities.csv").as_slice(),
        CsvFormat::default(),
    )
    .map_err(|e| e.to_string())?;
    let catalog = classify_attributes(&table, &BTreeMap::new(), 20).map_err(|e| e.to_string())?;
    ensure(catalog.measures.len() == 20, || {
        format!("fixture has {} measures", catalog.measures.len())
    })?;
    let specs = enumerate_pairwise(&catalog);
    ensure(specs.len() == 190, || {
        format!("{} specs, expected 190", specs.len())
    })?;
    let ids: BTreeSet<&str> = specs.iter().map(|s| s.id.as_str()).collect();
    ensure(ids.len() == 190, || "duplicate spec ids".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in 0..=64 {
        let table = numeric_table(m, 25, &mut rng);
        let catalog =
            classify_attributes(&table, &BTreeMap::new(), 20).map_err(|e| e.to_string())?;
        let specs = enumerate_pairwise(&catalog);
        ensure(specs.len() == m * m.saturating_sub(1) / 2, || {
            format!("m = {m}: {} specs", specs.len())
        })?;
        ensure(specs.iter().all(|s| s.x_attr < s.y_attr), || {
            format!("m = {m}: unordered pair")
        })?;
    }
    Ok("190 specs; m(m-1)/2 for m in 0..=64".into())
}

fn pyramid_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = PyramidConfig {
        min_resolution: 2,
        max_resolution: 128,
        density: false,
    };
    for trial in 0..50 {
        let n = if trial == 0 {
            0
        } else {
            rng.random_range(1..=10_000)
        };
        let ps = unit_points("x~y", mixed_points(n, &mut rng));
        let p = build_pyramid(&ps, &cfg).map_err(|e| e.to_string())?;
        for level in &p.levels {
            ensure(level.sum() == n as f64, || {
                format!(
                    "trial {trial}: r={} sums to {}",
                    level.resolution(),
                    level.sum()
                )
            })?;
        }
        for pair in p.levels.windows(2) {
            let down = block_downsample(&pair[1]).map_err(|e| e.to_string())?;
            ensure(down == pair[0], || {
                format!(
                    "trial {trial}: downsample of r={} differs",
                    pair[1].resolution()
                )
            })?;
        }
    }
    Ok("50 point sets, resolutions 2..128".into())
}

fn oracle_mld(a: &HeatmapPyramid, b: &HeatmapPyramid) -> f64 {
    let l = a.levels.len();
    let total: f64 = (0..l).map(|i| 1.0 / (1u64 << i) as f64).sum();
    a.levels
        .iter()
        .zip(&b.levels)
        .enumerate()
        .map(|(i, (x, y))| {
            let r = x.resolution() as f64;
            let sq: f64 = (0..x.resolution())
                .flat_map(|i| (0..x.resolution()).map(move |j| (i, j)))
                .map(|(i, j)| (x.get(i, j) - y.get(i, j)).powi(2))
                .sum();
            (1.0 / (1u64 << i) as f64 / total) * sq.sqrt() / r
        })
        .sum()
}

fn mld_pseudometric() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = PyramidConfig::new(2, 16).unwrap();
    let w = default_weights(cfg.level_count()).unwrap();
    let random_pyramid = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=400);
        to_density(&build_pyramid(&unit_points("x~y", mixed_points(n, rng)), &cfg).unwrap())
            .unwrap()
    };
    let mut worst_slack = f64::NEG_INFINITY;
    let mut worst_oracle: f64 = 0.0;
    for t in 0..1000 {
        let a = random_pyramid(&mut rng);
        let b = random_pyramid(&mut rng);
        // every tenth triple repeats a plot to exercise the zero case
        let c = if t % 10 == 0 {
            a.clone()
        } else {
            random_pyramid(&mut rng)
        };
        let d = |x: &HeatmapPyramid, y: &HeatmapPyramid| mld(x, y, &w).unwrap().value;
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        ensure(d(&a, &a) == 0.0 && d(&c, &c) == 0.0, || {
            format!("triple {t}: d(x,x) != 0")
        })?;
        ensure(ab >= 0.0 && bc >= 0.0 && ac >= 0.0, || {
            format!("triple {t}: negative")
        })?;
        ensure(ab == ba, || format!("triple {t}: asymmetric {ab} vs {ba}"))?;
        let slack = ac - (ab + bc);
        worst_slack = worst_slack.max(slack);
        ensure(slack <= 1e-9, || {
            format!("triple {t}: triangle violated by {slack}")
        })?;
        worst_oracle = worst_oracle.max((ab - oracle_mld(&a, &b)).abs());
    }
    ensure(worst_oracle <= 1e-12, || {
        format!("distance disagrees with reference sum by {worst_oracle}")
    })?;
    Ok(format!(
        "1000 triples; largest ac-(ab+bc) {worst_slack:.1e}; reference gap {worst_oracle:.1e}"
    ))
}

/// Grid units for polygon fixtures: coordinates are multiples of 1/1024.
const GRID: i64 = 1024;

/// Random simple polygon: angles sorted around a center with random radii.
/// Star-shaped polygons are usually concave and may have collinear runs.
fn random_polygon(rng: &mut impl Rng) -> Vec<(i64, i64)> {
    loop {
        let n = rng.random_range(3..=64);
        let (cx, cy) = (rng.random_range(300..=724), rng.random_range(300..=724));
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        angles.sort_by(f64::total_cmp);
        let poly: Vec<(i64, i64)> = angles
            .iter()
            .map(|a| {
                let r = rng.random_range(20.0..300.0);
                (
                    (cx as f64 + r * a.cos()).round().clamp(0.0, GRID as f64) as i64,
                    (cy as f64 + r * a.sin()).round().clamp(0.0, GRID as f64) as i64,
                )
            })
            .collect();
        if Region::new(to_points(&poly)).is_ok() {
            return poly;
        }
    }
}

fn to_points(poly: &[(i64, i64)]) -> Vec<Point> {
    poly.iter()
        .map(|&(x, y)| Point::new(x as f64 / GRID as f64, y as f64 / GRID as f64))
        .collect()
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Exact integer even-odd test. Boundary points count as inside; interior
/// parity is taken along an upward vertical ray.
fn oracle_inside(poly: &[(i64, i64)], p: (i64, i64)) -> bool {
    let n = poly.len();
    let mut crossings = 0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let on_line = cross(a, b, p) == 0;
        let in_box = p.0 >= a.0.min(b.0)
            && p.0 <= a.0.max(b.0)
            && p.1 >= a.1.min(b.1)
            && p.1 <= a.1.max(b.1);
        if on_line && in_box {
            return true;
        }
        // edges spanning p.x half-open, crossing strictly above p
        let (l, r) = if a.0 <= b.0 { (a, b) } else { (b, a) };
        if l.0 <= p.0 && p.0 < r.0 && cross(l, r, p) < 0 {
            crossings += 1;
        }
    }
    crossings % 2 == 1
}

fn region_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut boundary_hits = 0;
    for fixture in 0..100 {
        let poly = random_polygon(&mut rng);
        let n = rng.random_range(0..=1000);
        let pts: Vec<(i64, i64)> = (0..n)
            .map(|_| match rng.random_range(0..10) {
                // polygon vertices and edge points, to probe the boundary rule
                0 => poly[rng.random_range(0..poly.len())],
                1 => {
                    let i = rng.random_range(0..poly.len());
                    let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                    let g = gcd((b.0 - a.0).abs(), (b.1 - a.1).abs()).max(1);
                    let t = rng.random_range(0..=g);
                    (a.0 + (b.0 - a.0) / g * t, a.1 + (b.1 - a.1) / g * t)
                }
                _ => (rng.random_range(0..=GRID), rng.random_range(0..=GRID)),
            })
            .collect();
        let region = Region::new(to_points(&poly)).map_err(|e| e.to_string())?;
        let ps = unit_points("x~y", to_points(&pts));
        let expected = pts.iter().filter(|&&p| oracle_inside(&poly, p)).count();
        boundary_hits += pts
            .iter()
            .filter(|&&p| {
                (0..poly.len()).any(|i| cross(poly[i], poly[(i + 1) % poly.len()], p) == 0)
            })
            .count();
        let got = region_score(&ps, &region, false).value;
        ensure(got == expected as f64, || {
            format!("fixture {fixture}: scored {got}, oracle {expected}")
        })?;
    }
    Ok(format!(
        "100 polygons; {boundary_hits} points collinear with an edge"
    ))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lp_transport(a: &HeatmapLevel, b: &HeatmapLevel) -> Result<f64, String> {
    let r = a.resolution();
    let cells = r * r;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(cells * cells);
    for i in 0..cells {
        let (xi, yi) = a.cell_center(i / r, i % r);
        for j in 0..cells {
            let (xj, yj) = a.cell_center(j / r, j % r);
            vars.push(lp.add_var((xi - xj).hypot(yi - yj), (0.0, f64::INFINITY)));
        }
    }
    for i in 0..cells {
        let row: Vec<_> = (0..cells).map(|j| (vars[i * cells + j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, a.cells()[i]);
    }
    // one column constraint is implied by the rest
    for j in 0..cells - 1 {
        let col: Vec<_> = (0..cells).map(|i| (vars[i * cells + j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, b.cells()[j]);
    }
    lp.solve().map(|s| s.objective()).map_err(|e| e.to_string())
}

/// Density whose cells are multiples of 1/1024, so both grids sum to one
/// exactly and the LP is balanced without rounding.
fn dyadic_density(r: usize, rng: &mut impl Rng) -> HeatmapLevel {
    let mut units = vec![0u32; r * r];
    let support: Vec<usize> = (0..r * r).filter(|_| rng.random_bool(0.6)).collect();
    let support = if support.is_empty() { vec![0] } else { support };
    for _ in 0..1024 {
        units[support[rng.random_range(0..support.len())]] += 1;
    }
    let cells = units.iter().map(|&u| u as f64 / 1024.0).collect();
    HeatmapLevel::from_cells(r, HeatmapKind::Density, cells).unwrap()
}

fn emd_oracle() -> Outcome {
    let one_hot = |r: usize, idx: usize| {
        let mut cells = vec![0.0; r * r];
        cells[idx] = 1.0;
        HeatmapLevel::from_cells(r, HeatmapKind::Density, cells).unwrap()
    };
    let corner = emd_exact(&one_hot(2, 0), &one_hot(2, 3)).map_err(|e| e.to_string())?;
    ensure((corner - 2f64.sqrt() / 2.0).abs() <= 1e-9, || {
        format!("corner-to-corner gave {corner}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let same = dyadic_density(4, &mut rng);
    let id = emd_exact(&same, &same).map_err(|e| e.to_string())?;
    ensure(id.abs() <= 1e-9, || format!("identity gave {id}"))?;

    let mut worst: f64 = 0.0;
    for pair in 0..50 {
        let a = dyadic_density(4, &mut rng);
        let b = dyadic_density(4, &mut rng);
        let got = emd_exact(&a, &b).map_err(|e| e.to_string())?;
        let want = lp_transport(&a, &b)?;
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-6, || {
            format!("pair {pair}: solver {got}, LP {want}")
        })?;
    }
    Ok(format!(
        "50 pairs; max gap {worst:.1e}; hand examples exact"
    ))
}

fn separation() -> Outcome {
    let cfg = PyramidConfig::default();
    let w = default_weights(cfg.level_count()).unwrap();
    let w16 = default_weights(4).unwrap();
    let truncate = |p: &HeatmapPyramid, max: usize| HeatmapPyramid {
        levels: p
            .levels
            .iter()
            .filter(|l| l.resolution() <= max)
            .cloned()
            .collect(),
        ..p.clone()
    };
    let mut margins = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let density = |pts| to_density(&build_pyramid(&unit_points("x~y", pts), &cfg).unwrap());
        let base = density(gaussian_cluster(500, 0.25, 0.5, 0.08, &mut rng)).unwrap();
        let resample = density(gaussian_cluster(500, 0.25, 0.5, 0.08, &mut rng)).unwrap();
        let shifted = density(gaussian_cluster(500, 0.75, 0.5, 0.08, &mut rng)).unwrap();

        let near = mld(&base, &resample, &w).unwrap().value;
        let far = mld(&base, &shifted, &w).unwrap().value;
        ensure(near < far, || {
            format!("seed {seed}: distance {near} !< {far}")
        })?;
        // same ordering on the 2..16 pyramid
        let (near, far) = (
            mld(&truncate(&base, 16), &truncate(&resample, 16), &w16)
                .unwrap()
                .value,
            mld(&truncate(&base, 16), &truncate(&shifted, 16), &w16)
                .unwrap()
                .value,
        );
        ensure(near < far, || {
            format!("seed {seed}: 2..16 distance {near} !< {far}")
        })?;

        let r8 = |p: &HeatmapPyramid| p.levels.iter().find(|l| l.resolution() == 8).cloned();
        let (b8, s8, f8) = (
            r8(&base).unwrap(),
            r8(&resample).unwrap(),
            r8(&shifted).unwrap(),
        );
        let near = emd_exact(&b8, &s8).map_err(|e| e.to_string())?;
        let far = emd_exact(&b8, &f8).map_err(|e| e.to_string())?;
        ensure(near < far, || {
            format!("seed {seed}: transport {near} !< {far}")
        })?;
        margins.push(far / near.max(f64::MIN_POSITIVE));
    }
    let min = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!("20/20 seeds; smallest transport ratio {min:.1}"))
}

fn pruning_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut queries = 0;
    for trial in 0..20 {
        let table = numeric_table(
            rng.random_range(3..=8),
            rng.random_range(30..=300),
            &mut rng,
        );
        let catalog = classify_attributes(&table, &BTreeMap::new(), 20).unwrap();
        let specs = enumerate_pairwise(&catalog);
        let pyr = PyramidConfig::new(2, 2usize << rng.random_range(1..=5)).unwrap();
        let pre = PreprocessConfig {
            seed: rng.random(),
            ..PreprocessConfig::default()
        };
        let c = Collection::build(&table, &specs, &pre, &pyr).map_err(|e| e.to_string())?;
        let raw: Vec<f64> = (0..pyr.level_count())
            .map(|_| rng.random::<f64>())
            .collect();
        let mut sorted = raw.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted[0] += 0.01;
        let custom = WeightSchedule::new(sorted).unwrap();

        let mut refs: Vec<SimilarityQuery> = specs
            .iter()
            .map(|s| SimilarityQuery::Spec(s.id.clone()))
            .collect();
        refs.push(SimilarityQuery::Points(common::uniform_points(
            50, &mut rng,
        )));
        for q in &refs {
            for w in [None, Some(&custom)] {
                for k in [TopK::ALL, TopK::Count(3)] {
                    let plain = c.query_similar(q, k, w).map_err(|e| e.to_string())?;
                    let pruned = c
                        .query_similar_pruned(q, k, w, f64::INFINITY)
                        .map_err(|e| e.to_string())?;
                    ensure(pruned.results == plain && pruned.pruned == 0, || {
                        format!("collection {trial}: lists differ for {q:?}")
                    })?;
                    queries += 1;
                }
            }
        }
    }
    Ok(format!("20 collections; {queries} query pairs identical"))
}

fn communities_collection() -> Result<Collection, String> {
    let cfg = ServiceConfig::default();
    let ds = load_dataset(&fixture_bytes("communities.csv"), &cfg).map_err(|e| e.to_string())?;
    build_collection(&ds, &CollectionRequest::pairwise(), &cfg).map_err(|e| e.to_string())
}

fn query_latency() -> Outcome {
    let c = communities_collection()?;
    ensure(c.len() == 190, || format!("{} plots", c.len()))?;
    ensure(
        c.pyramid_config().resolutions() == vec![2, 4, 8, 16, 32, 64],
        || "unexpected resolutions".into(),
    )?;
    let ids: Vec<String> = c.entries().iter().map(|e| e.spec.id.clone()).collect();
    let mut times = Vec::new();
    for id in ids.iter().step_by(10) {
        let q = SimilarityQuery::Spec(id.clone());
        let start = Instant::now();
        let out = c
            .query_similar(&q, TopK::Count(20), None)
            .map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        ensure(out.len() == 20, || "short result list".into())?;
    }
    times.sort();
    let median = times[times.len() / 2];
    let max = *times.last().unwrap();
    ensure(max < Duration::from_millis(100), || {
        format!("slowest query {max:?}, median {median:?}")
    })?;
    Ok(format!(
        "190 plots, 2..64; median {median:?}, max {max:?} single-threaded"
    ))
}

fn build_and_query_json() -> Result<Vec<u8>, String> {
    let cfg = ServiceConfig::default();
    let c = communities_collection()?;
    let queries: [QueryRequest; 3] = [
        serde_json::from_str(r#"{"type":"similar","ref":"pctWInvInc~pctWPubAsst","k":20}"#)
            .unwrap(),
        serde_json::from_str(
            r#"{"type":"region","polygon":[[0,0],[0.5,0],[0.5,0.5],[0,0.5]],"k":"all"}"#,
        )
        .unwrap(),
        serde_json::from_str(
            r#"{"type":"similar","ref":[[1,5],[2,4],[3,3],[4,2]],"prune_threshold":0.05}"#,
        )
        .unwrap(),
    ];
    let mut out = serde_json::to_vec(&c.manifest()).unwrap();
    for q in &queries {
        let resp = execute_query(&c, q, &cfg).map_err(|e| e.to_string())?;
        out.extend(serde_json::to_vec(&resp).unwrap());
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let first = build_and_query_json()?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let second = single.install(build_and_query_json)?;
    ensure(first == second, || "JSON differs between runs".into())?;
    Ok(format!("{} bytes identical across two builds", first.len()))
}
