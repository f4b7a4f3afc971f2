//! Scores: per-level Euclidean distance, the multi-level distance over
//! heatmap pyramids, point counts inside a polygon, and exact transport
//! cost as a desk-scale reference.

mod emd;
mod region;

pub use emd::{emd_exact, EMD_MAX_RESOLUTION};
pub use region::{region_score, Region};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{HeatmapLevel, HeatmapPyramid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub direction: Direction,
}

impl Score {
    pub fn distance(value: f64) -> Self {
        Self {
            value,
            direction: Direction::LowerIsBetter,
        }
    }

    pub fn count(value: f64) -> Self {
        Self {
            value,
            direction: Direction::HigherIsBetter,
        }
    }
}

/// Per-level weights, coarse to fine. Non-negative, non-increasing, with at
/// least one positive entry. Serialized as a plain array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightSchedule(Vec<f64>);

impl WeightSchedule {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("weight schedule is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "weights must be finite and non-negative".into(),
            ));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidConfig(
                "at least one weight must be positive".into(),
            ));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig(
                "weights must not increase from coarse to fine levels".into(),
            ));
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * c).collect())
    }
}

impl TryFrom<Vec<f64>> for WeightSchedule {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightSchedule> for Vec<f64> {
    fn from(w: WeightSchedule) -> Self {
        w.0
    }
}

/// Geometric weights halving per level, normalized to sum to one.
pub fn default_weights(level_count: usize) -> Result<WeightSchedule> {
    if level_count == 0 {
        return Err(Error::InvalidConfig(
            "level count must be at least 1".into(),
        ));
    }
    let raw: Vec<f64> = (0..level_count).map(|i| 0.5f64.powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    WeightSchedule::new(raw.into_iter().map(|w| w / total).collect())
}

/// Euclidean distance between two grids divided by the resolution.
///
/// Density mass spreads over `r²` cells, so the raw norm shrinks as
/// resolution grows; the `1/r` factor keeps levels on a comparable scale.
pub fn level_distance(a: &HeatmapLevel, b: &HeatmapLevel) -> Result<f64> {
    if a.resolution() != b.resolution() || a.kind() != b.kind() {
        return Err(Error::IncompatibleLevel(format!(
            "{}x{} {:?} vs {}x{} {:?}",
            a.resolution(),
            a.resolution(),
            a.kind(),
            b.resolution(),
            b.resolution(),
            b.kind()
        )));
    }
    Ok(raw_level_distance(a, b))
}

pub(crate) fn raw_level_distance(a: &HeatmapLevel, b: &HeatmapLevel) -> f64 {
    let sq: f64 = a
        .cells()
        .iter()
        .zip(b.cells())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    sq.sqrt() / a.resolution() as f64
}

/// Checks that two pyramids and a schedule line up level for level.
pub(crate) fn check_aligned(
    a: &HeatmapPyramid,
    b: &HeatmapPyramid,
    w: &WeightSchedule,
) -> Result<()> {
    if a.kind != b.kind || a.resolutions() != b.resolutions() {
        return Err(Error::IncompatiblePyramid(format!(
            "{:?} {:?} vs {:?} {:?}",
            a.kind,
            a.resolutions(),
            b.kind,
            b.resolutions()
        )));
    }
    if w.len() != a.levels.len() {
        return Err(Error::IncompatiblePyramid(format!(
            "{} weights for {} levels",
            w.len(),
            a.levels.len()
        )));
    }
    Ok(())
}

/// Multi-level distance: the weighted sum of [`level_distance`] over
/// aligned levels.
pub fn mld(a: &HeatmapPyramid, b: &HeatmapPyramid, w: &WeightSchedule) -> Result<Score> {
    check_aligned(a, b, w)?;
    Ok(Score::distance(mld_aligned(a, b, w)))
}

pub(crate) fn mld_aligned(a: &HeatmapPyramid, b: &HeatmapPyramid, w: &WeightSchedule) -> f64 {
    a.levels
        .iter()
        .zip(&b.levels)
        .zip(w.weights())
        .filter(|(_, k)| **k > 0.0)
        .map(|((la, lb), k)| k * raw_level_distance(la, lb))
        .sum()
}
