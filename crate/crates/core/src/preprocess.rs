//! Outlier clipping, unit-square normalization and sampling.
//!
//! The pipeline order is fixed: clip, then normalize (so the extent reflects
//! the clipped data), then sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{RawPointSet, ScatterplotSpec};

/// A 2-D point. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let e = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::InvalidConfig(format!("invalid extent {self:?}")));
        }
        Ok(())
    }

    /// Bounding box of `points`; `None` when empty.
    pub fn of(points: &[Point]) -> Option<Self> {
        let first = points.first()?;
        let mut e = Self {
            x_min: first.x,
            x_max: first.x,
            y_min: first.y,
            y_max: first.y,
        };
        for p in &points[1..] {
            e.x_min = e.x_min.min(p.x);
            e.x_max = e.x_max.max(p.x);
            e.y_min = e.y_min.min(p.y);
            e.y_max = e.y_max.max(p.y);
        }
        Some(e)
    }

    pub fn union(&self, other: &Extent) -> Extent {
        Extent {
            x_min: self.x_min.min(other.x_min),
            x_max: self.x_max.max(other.x_max),
            y_min: self.y_min.min(other.y_min),
            y_max: self.y_max.max(other.y_max),
        }
    }

    fn map(&self, p: Point) -> Point {
        Point::new(
            unit(p.x, self.x_min, self.x_max),
            unit(p.y, self.y_min, self.y_max),
        )
    }
}

/// Linear map of `[lo, hi]` onto `[0, 1]`, clamped; a zero-width axis maps
/// to the center.
fn unit(v: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        return 0.5;
    }
    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// A scatterplot normalized to the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub spec: ScatterplotSpec,
    pub points: Vec<Point>,
    /// The data-unit extent mapped onto the unit square.
    pub source_extent: Extent,
    pub n_before_sampling: usize,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Lower clip percentile in `[0, 100)`.
    pub clip_low: f64,
    pub clip_high: f64,
    pub sample_cap: usize,
    pub seed: u64,
    /// Normalize every plot against this extent instead of its own.
    pub shared_extent: Option<Extent>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            clip_low: 1.0,
            clip_high: 99.0,
            sample_cap: 10_000,
            seed: 0,
            shared_extent: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        check_clip(self.clip_low, self.clip_high)?;
        if self.sample_cap == 0 {
            return Err(Error::InvalidConfig("sample_cap must be at least 1".into()));
        }
        if let Some(e) = &self.shared_extent {
            e.validate()?;
        }
        Ok(())
    }
}

fn check_clip(low: f64, high: f64) -> Result<()> {
    if !(0.0..100.0).contains(&low) || !(low < high && high <= 100.0) {
        return Err(Error::InvalidConfig(format!(
            "clip percentiles must satisfy 0 <= low < high <= 100, got ({low}, {high})"
        )));
    }
    Ok(())
}

/// Percentile of sorted values by linear interpolation between ranks.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

fn axis_bounds(values: impl Iterator<Item = f64>, low: f64, high: f64) -> (f64, f64) {
    let mut sorted: Vec<f64> = values.collect();
    sorted.sort_by(f64::total_cmp);
    (percentile(&sorted, low), percentile(&sorted, high))
}

/// Keeps points whose x and y both fall inside their axis's
/// `[clip_low, clip_high]` percentile interval.
pub fn clip_outliers(raw: &RawPointSet, clip_low: f64, clip_high: f64) -> Result<RawPointSet> {
    check_clip(clip_low, clip_high)?;
    if raw.is_empty() {
        return Err(Error::EmptyPlot(raw.spec.id.clone()));
    }
    let (x_lo, x_hi) = axis_bounds(raw.points.iter().map(|p| p.x), clip_low, clip_high);
    let (y_lo, y_hi) = axis_bounds(raw.points.iter().map(|p| p.y), clip_low, clip_high);
    let points: Vec<Point> = raw
        .points
        .iter()
        .copied()
        .filter(|p| (x_lo..=x_hi).contains(&p.x) && (y_lo..=y_hi).contains(&p.y))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyAfterClip);
    }
    Ok(RawPointSet {
        spec: raw.spec.clone(),
        points,
        dropped_rows: raw.dropped_rows,
    })
}

/// Maps points onto the unit square, from `shared_extent` if given or from
/// the points' own bounding box otherwise.
pub fn normalize(raw: &RawPointSet, shared_extent: Option<&Extent>) -> Result<PointSet> {
    let extent = match shared_extent {
        Some(e) => {
            e.validate()?;
            *e
        }
        None => Extent::of(&raw.points).ok_or_else(|| Error::EmptyPlot(raw.spec.id.clone()))?,
    };
    let points: Vec<Point> = raw.points.iter().map(|p| extent.map(*p)).collect();
    Ok(PointSet {
        spec: raw.spec.clone(),
        n_before_sampling: points.len(),
        points,
        source_extent: extent,
    })
}

/// Uniform sample without replacement, order preserved. Deterministic for a
/// given seed.
pub fn sample(ps: &PointSet, cap: usize, seed: u64) -> Result<PointSet> {
    if cap == 0 {
        return Err(Error::InvalidConfig("sample cap must be at least 1".into()));
    }
    let n = ps.points.len();
    if n <= cap {
        return Ok(ps.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, cap).into_vec();
    picked.sort_unstable();
    Ok(PointSet {
        spec: ps.spec.clone(),
        points: picked.into_iter().map(|i| ps.points[i]).collect(),
        source_extent: ps.source_extent,
        n_before_sampling: ps.n_before_sampling.max(n),
    })
}

/// The full pipeline. Clipping comes first so the normalization extent
/// reflects clipped data; sampling comes last.
///
/// An empty input yields an empty point set. When clipping would remove
/// every point (tiny plots under tight percentiles) the plot is normalized
/// unclipped.
pub fn preprocess(raw: &RawPointSet, cfg: &PreprocessConfig) -> Result<PointSet> {
    cfg.validate()?;
    if raw.is_empty() {
        return Ok(PointSet {
            spec: raw.spec.clone(),
            points: Vec::new(),
            source_extent: cfg.shared_extent.unwrap_or(Extent {
                x_min: 0.0,
                x_max: 0.0,
                y_min: 0.0,
                y_max: 0.0,
            }),
            n_before_sampling: 0,
        });
    }
    let clipped = match clip_outliers(raw, cfg.clip_low, cfg.clip_high) {
        Ok(c) => c,
        Err(Error::EmptyAfterClip) => raw.clone(),
        Err(e) => return Err(e),
    };
    let normalized = normalize(&clipped, cfg.shared_extent.as_ref())?;
    sample(&normalized, cfg.sample_cap, cfg.seed)
}
