//! Heatmap pyramids: a plot binned into square grids at dyadic resolutions.
//!
//! Cell `(i, j)` holds the points with x-bin `i` and y-bin `j`; x grows to
//! the right and y grows upward. Storage is row-major over `(i, j)`, so the
//! flat index is `i * r + j`.

mod cache;

pub use cache::{decode_pyramids, encode_pyramids, CACHE_MAGIC, CACHE_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapKind {
    Counts,
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LevelRepr", try_from = "LevelRepr")]
pub struct HeatmapLevel {
    resolution: usize,
    kind: HeatmapKind,
    cells: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LevelRepr {
    resolution: usize,
    kind: HeatmapKind,
    cells: Vec<Vec<f64>>,
}

impl From<HeatmapLevel> for LevelRepr {
    fn from(level: HeatmapLevel) -> Self {
        let r = level.resolution;
        LevelRepr {
            resolution: r,
            kind: level.kind,
            cells: level.cells.chunks(r).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<LevelRepr> for HeatmapLevel {
    type Error = Error;

    fn try_from(repr: LevelRepr) -> Result<Self> {
        let r = repr.resolution;
        if repr.cells.len() != r || repr.cells.iter().any(|row| row.len() != r) {
            return Err(Error::InvalidRequest(format!(
                "level cells are not {r}x{r}"
            )));
        }
        HeatmapLevel::from_cells(r, repr.kind, repr.cells.concat())
    }
}

pub fn is_valid_resolution(r: usize) -> bool {
    r >= 2 && r.is_power_of_two()
}

impl HeatmapLevel {
    pub fn zeros(resolution: usize, kind: HeatmapKind) -> Result<Self> {
        Self::from_cells(resolution, kind, vec![0.0; resolution * resolution])
    }

    /// Builds a level from row-major cells (`cells[i * r + j]`).
    pub fn from_cells(resolution: usize, kind: HeatmapKind, cells: Vec<f64>) -> Result<Self> {
        if !is_valid_resolution(resolution) {
            return Err(Error::InvalidConfig(format!(
                "resolution {resolution} is not a power of two >= 2"
            )));
        }
        if cells.len() != resolution * resolution {
            return Err(Error::InvalidConfig(format!(
                "expected {} cells, got {}",
                resolution * resolution,
                cells.len()
            )));
        }
        if cells.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidConfig(
                "cells must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            resolution,
            kind,
            cells,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn kind(&self) -> HeatmapKind {
        self.kind
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.resolution + j]
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Center of cell `(i, j)` in unit-square coordinates.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let r = self.resolution as f64;
        ((i as f64 + 0.5) / r, (j as f64 + 0.5) / r)
    }
}

#[inline]
fn cell_index(v: f64, r: usize) -> usize {
    // v == 1.0 lands in the last cell; clamp also guards stray rounding.
    ((v * r as f64).floor().max(0.0) as usize).min(r - 1)
}

/// Counts points per cell at resolution `r`.
pub fn bin(ps: &PointSet, r: usize) -> Result<HeatmapLevel> {
    let mut level = HeatmapLevel::zeros(r, HeatmapKind::Counts)?;
    for p in &ps.points {
        level.cells[cell_index(p.x, r) * r + cell_index(p.y, r)] += 1.0;
    }
    Ok(level)
}

/// Sums each 2x2 block, halving the resolution.
pub fn block_downsample(level: &HeatmapLevel) -> Result<HeatmapLevel> {
    let r = level.resolution;
    if r < 4 {
        return Err(Error::CannotDownsample(r));
    }
    let half = r / 2;
    let mut cells = vec![0.0; half * half];
    for i in 0..r {
        for j in 0..r {
            cells[(i / 2) * half + j / 2] += level.get(i, j);
        }
    }
    Ok(HeatmapLevel {
        resolution: half,
        kind: level.kind,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PyramidConfig {
    pub min_resolution: usize,
    pub max_resolution: usize,
    /// Score on per-plot densities (cells divided by point count) rather
    /// than raw counts.
    pub density: bool,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            min_resolution: 2,
            max_resolution: 64,
            density: true,
        }
    }
}

impl PyramidConfig {
    pub fn new(min_resolution: usize, max_resolution: usize) -> Result<Self> {
        let cfg = Self {
            min_resolution,
            max_resolution,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !is_valid_resolution(self.min_resolution)
            || !is_valid_resolution(self.max_resolution)
            || self.min_resolution > self.max_resolution
        {
            return Err(Error::InvalidConfig(format!(
                "pyramid resolutions must be powers of two with 2 <= min <= max, got ({}, {})",
                self.min_resolution, self.max_resolution
            )));
        }
        Ok(())
    }

    pub fn resolutions(&self) -> Vec<usize> {
        std::iter::successors(Some(self.min_resolution), |r| Some(r * 2))
            .take_while(|r| *r <= self.max_resolution)
            .collect()
    }

    pub fn level_count(&self) -> usize {
        self.resolutions().len()
    }
}

/// A plot's heatmaps ordered coarse to fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapPyramid {
    pub spec_id: String,
    pub point_count: usize,
    pub kind: HeatmapKind,
    pub levels: Vec<HeatmapLevel>,
}

impl HeatmapPyramid {
    pub fn new(
        spec_id: impl Into<String>,
        point_count: usize,
        kind: HeatmapKind,
        levels: Vec<HeatmapLevel>,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidConfig(
                "a pyramid needs at least one level".into(),
            ));
        }
        for pair in levels.windows(2) {
            if pair[1].resolution != pair[0].resolution * 2 {
                return Err(Error::InvalidConfig(
                    "pyramid resolutions must double level to level".into(),
                ));
            }
        }
        if levels.iter().any(|l| l.kind != kind) {
            return Err(Error::InvalidConfig(
                "pyramid levels must share a kind".into(),
            ));
        }
        Ok(Self {
            spec_id: spec_id.into(),
            point_count,
            kind,
            levels,
        })
    }

    /// Flagged empty: built from a plot with no points.
    pub fn is_empty(&self) -> bool {
        self.point_count == 0
    }

    pub fn resolutions(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.resolution).collect()
    }

    pub fn coarsest(&self) -> &HeatmapLevel {
        &self.levels[0]
    }
}

/// Bins a point set at every resolution of `cfg`. Levels are counts.
pub fn build_pyramid(ps: &PointSet, cfg: &PyramidConfig) -> Result<HeatmapPyramid> {
    cfg.validate()?;
    let levels = cfg
        .resolutions()
        .into_iter()
        .map(|r| bin(ps, r))
        .collect::<Result<Vec<_>>>()?;
    HeatmapPyramid::new(ps.spec.id.clone(), ps.len(), HeatmapKind::Counts, levels)
}

/// Divides every level by the point count. Empty plots stay all-zero.
pub fn to_density(p: &HeatmapPyramid) -> Result<HeatmapPyramid> {
    if p.kind != HeatmapKind::Counts {
        return Err(Error::IncompatiblePyramid(
            "pyramid is already a density".into(),
        ));
    }
    let n = p.point_count as f64;
    let levels = p
        .levels
        .iter()
        .map(|l| HeatmapLevel {
            resolution: l.resolution,
            kind: HeatmapKind::Density,
            cells: if p.point_count == 0 {
                l.cells.clone()
            } else {
                l.cells.iter().map(|c| c / n).collect()
            },
        })
        .collect();
    Ok(HeatmapPyramid {
        spec_id: p.spec_id.clone(),
        point_count: p.point_count,
        kind: HeatmapKind::Density,
        levels,
    })
}
