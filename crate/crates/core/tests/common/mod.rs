#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use scatterquery_core::{Extent, Point, PointSet, ScatterplotSpec};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).expect("fixture readable")
}

/// A point set already in the unit square.
pub fn unit_points(id: &str, points: Vec<Point>) -> PointSet {
    let (x, y) = id.split_once('~').unwrap_or((id, "y"));
    PointSet {
        spec: ScatterplotSpec::new(x, y, None).unwrap(),
        n_before_sampling: points.len(),
        points,
        source_extent: Extent::new(0.0, 1.0, 0.0, 1.0).unwrap(),
    }
}

pub fn uniform_points(n: usize, rng: &mut impl Rng) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect()
}

/// Isotropic Gaussian cluster clamped to the unit square.
pub fn gaussian_cluster(n: usize, cx: f64, cy: f64, sigma: f64, rng: &mut impl Rng) -> Vec<Point> {
    let nx = Normal::new(cx, sigma).unwrap();
    let ny = Normal::new(cy, sigma).unwrap();
    (0..n)
        .map(|_| {
            Point::new(
                nx.sample(rng).clamp(0.0, 1.0),
                ny.sample(rng).clamp(0.0, 1.0),
            )
        })
        .collect()
}

/// A mix of uniform noise, Gaussian blobs and exact grid-edge values, so
/// binning sees points on cell borders and on the unit-square boundary.
pub fn mixed_points(n: usize, rng: &mut impl Rng) -> Vec<Point> {
    let blobs = rng.random_range(1..4);
    let centers: Vec<(f64, f64, f64)> = (0..blobs)
        .map(|_| (rng.random(), rng.random(), rng.random_range(0.02..0.2)))
        .collect();
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => Point::new(
                rng.random_range(0..=64) as f64 / 64.0,
                rng.random_range(0..=64) as f64 / 64.0,
            ),
            1..=3 => Point::new(rng.random(), rng.random()),
            _ => {
                let (cx, cy, s) = centers[rng.random_range(0..centers.len())];
                let n = Normal::new(0.0, s).unwrap();
                Point::new(
                    (cx + n.sample(rng)).clamp(0.0, 1.0),
                    (cy + n.sample(rng)).clamp(0.0, 1.0),
                )
            }
        })
        .collect()
}
