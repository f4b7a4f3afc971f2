//! Collections of preprocessed scatterplots and the queries that rank them.
//!
//! A [`Collection`] is built once (points clipped, normalized, sampled and
//! binned eagerly) and is immutable afterwards, so it can be shared across
//! threads and queried concurrently.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{materialize, RawPointSet, ScatterplotSpec, Table};
use crate::preprocess::{preprocess, Extent, Point, PointSet, PreprocessConfig};
use crate::representation::{
    build_pyramid, to_density, HeatmapKind, HeatmapPyramid, PyramidConfig,
};
use crate::scoring::{
    default_weights, mld_aligned, raw_level_distance, region_score, Region, Score, WeightSchedule,
};

/// How many results a query returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopK {
    Count(usize),
    All(AllKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllKeyword {
    All,
}

impl TopK {
    pub const ALL: TopK = TopK::All(AllKeyword::All);

    fn limit(self) -> Result<usize> {
        match self {
            TopK::Count(0) => Err(Error::InvalidRequest("k must be at least 1".into())),
            TopK::Count(k) => Ok(k),
            TopK::All(_) => Ok(usize::MAX),
        }
    }
}

impl From<usize> for TopK {
    fn from(k: usize) -> Self {
        TopK::Count(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub spec_id: String,
    pub score: Score,
    /// 1-based.
    pub rank: usize,
}

/// The reference plot of a similarity query.
#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityQuery {
    /// A plot of the collection; it is excluded from its own results.
    Spec(String),
    /// A pyramid built with the collection's resolutions.
    Pyramid(HeatmapPyramid),
    /// Raw points in data units, preprocessed and binned like the members.
    Points(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedResults {
    pub results: Vec<RankedResult>,
    /// A finite threshold was in force.
    pub pruning_active: bool,
    /// Candidates skipped on their coarse-level term.
    pub pruned: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotEntry {
    pub spec: ScatterplotSpec,
    pub points: PointSet,
    /// Counts pyramid, as persisted in the cache.
    pub pyramid: HeatmapPyramid,
    /// The pyramid similarity queries compare (density unless configured
    /// otherwise).
    pub scoring: HeatmapPyramid,
    pub dropped_rows: usize,
}

impl PlotEntry {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Summary of a collection, serializable for clients and on-disk storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionManifest {
    pub collection_id: String,
    pub specs: Vec<ScatterplotSpec>,
    pub preprocess: PreprocessConfig,
    pub pyramid: PyramidConfig,
    /// Union of the plots' source extents, for shared-axis rendering.
    pub collection_extent: Option<Extent>,
    pub empty_plots: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Collection {
    id: String,
    entries: Vec<PlotEntry>,
    index: HashMap<String, usize>,
    preprocess: PreprocessConfig,
    pyramid: PyramidConfig,
    weights: WeightSchedule,
}

fn scoring_pyramid(counts: &HeatmapPyramid, cfg: &PyramidConfig) -> Result<HeatmapPyramid> {
    if cfg.density {
        to_density(counts)
    } else {
        Ok(counts.clone())
    }
}

fn build_entry(
    table: &Table,
    spec: &ScatterplotSpec,
    pre: &PreprocessConfig,
    pyr: &PyramidConfig,
) -> Result<PlotEntry> {
    let raw = materialize(table, spec)?;
    let points = preprocess(&raw, pre)?;
    let pyramid = build_pyramid(&points, pyr)?;
    let scoring = scoring_pyramid(&pyramid, pyr)?;
    Ok(PlotEntry {
        spec: spec.clone(),
        points,
        pyramid,
        scoring,
        dropped_rows: raw.dropped_rows,
    })
}

impl Collection {
    /// Builds the point set and pyramid of every spec.
    ///
    /// Plots without points are kept with all-zero pyramids. The id is a
    /// digest of the build inputs.
    pub fn build(
        table: &Table,
        specs: &[ScatterplotSpec],
        preprocess_cfg: &PreprocessConfig,
        pyramid_cfg: &PyramidConfig,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidSpec(
                "a collection needs at least one spec".into(),
            ));
        }
        preprocess_cfg.validate()?;
        pyramid_cfg.validate()?;
        let entries = specs
            .par_iter()
            .map(|s| build_entry(table, s, preprocess_cfg, pyramid_cfg))
            .collect::<Result<Vec<_>>>()?;
        let id = collection_digest(table.name(), specs, preprocess_cfg, pyramid_cfg)?;
        Self::assemble(id, entries, preprocess_cfg.clone(), *pyramid_cfg)
    }

    /// Rebuilds a collection whose counts pyramids were persisted, checking
    /// that the cache matches what the table and configs produce.
    pub fn restore(
        id: impl Into<String>,
        table: &Table,
        specs: &[ScatterplotSpec],
        preprocess_cfg: &PreprocessConfig,
        pyramid_cfg: &PyramidConfig,
        cached: Vec<HeatmapPyramid>,
    ) -> Result<Self> {
        if cached.len() != specs.len() {
            return Err(Error::CacheFormat(format!(
                "{} cached pyramids for {} specs",
                cached.len(),
                specs.len()
            )));
        }
        let entries = specs
            .par_iter()
            .zip(cached)
            .map(|(spec, pyramid)| {
                let raw = materialize(table, spec)?;
                let points = preprocess(&raw, preprocess_cfg)?;
                if pyramid.spec_id != spec.id
                    || pyramid.point_count != points.len()
                    || pyramid.kind != HeatmapKind::Counts
                    || pyramid.resolutions() != pyramid_cfg.resolutions()
                {
                    return Err(Error::CacheFormat(format!(
                        "cached pyramid for `{}` does not match the collection",
                        spec.id
                    )));
                }
                let scoring = scoring_pyramid(&pyramid, pyramid_cfg)?;
                Ok(PlotEntry {
                    spec: spec.clone(),
                    points,
                    pyramid,
                    scoring,
                    dropped_rows: raw.dropped_rows,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(id.into(), entries, preprocess_cfg.clone(), *pyramid_cfg)
    }

    fn assemble(
        id: String,
        entries: Vec<PlotEntry>,
        preprocess: PreprocessConfig,
        pyramid: PyramidConfig,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.spec.id.clone(), i).is_some() {
                return Err(Error::InvalidSpec(format!(
                    "duplicate spec `{}`",
                    e.spec.id
                )));
            }
        }
        let weights = default_weights(pyramid.level_count())?;
        Ok(Self {
            id,
            entries,
            index,
            preprocess,
            pyramid,
            weights,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PlotEntry] {
        &self.entries
    }

    pub fn entry(&self, spec_id: &str) -> Result<&PlotEntry> {
        self.index
            .get(spec_id)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| Error::not_found("plot", spec_id))
    }

    pub fn preprocess_config(&self) -> &PreprocessConfig {
        &self.preprocess
    }

    pub fn pyramid_config(&self) -> &PyramidConfig {
        &self.pyramid
    }

    pub fn default_weights(&self) -> &WeightSchedule {
        &self.weights
    }

    /// Counts pyramids in spec order, as written to the cache file.
    pub fn counts_pyramids(&self) -> Vec<HeatmapPyramid> {
        self.entries.iter().map(|e| e.pyramid.clone()).collect()
    }

    pub fn extent(&self) -> Option<Extent> {
        self.entries
            .iter()
            .filter(|e| !e.is_empty())
            .map(|e| e.points.source_extent)
            .reduce(|a, b| a.union(&b))
    }

    pub fn manifest(&self) -> CollectionManifest {
        CollectionManifest {
            collection_id: self.id.clone(),
            specs: self.entries.iter().map(|e| e.spec.clone()).collect(),
            preprocess: self.preprocess.clone(),
            pyramid: self.pyramid,
            collection_extent: self.extent(),
            empty_plots: self
                .entries
                .iter()
                .filter(|e| e.is_empty())
                .map(|e| e.spec.id.clone())
                .collect(),
        }
    }

    /// Turns a query into a scoring pyramid plus the member to exclude.
    fn resolve(&self, query: &SimilarityQuery) -> Result<(HeatmapPyramid, Option<usize>)> {
        match query {
            SimilarityQuery::Spec(id) => {
                let idx = *self
                    .index
                    .get(id)
                    .ok_or_else(|| Error::not_found("plot", id.clone()))?;
                Ok((self.entries[idx].scoring.clone(), Some(idx)))
            }
            SimilarityQuery::Pyramid(p) => {
                if p.resolutions() != self.pyramid.resolutions() {
                    return Err(Error::IncompatiblePyramid(format!(
                        "query resolutions {:?}, collection {:?}",
                        p.resolutions(),
                        self.pyramid.resolutions()
                    )));
                }
                let p = match (p.kind, self.pyramid.density) {
                    (HeatmapKind::Counts, true) => to_density(p)?,
                    (HeatmapKind::Density, false) => {
                        return Err(Error::IncompatiblePyramid(
                            "density query against a counts collection".into(),
                        ))
                    }
                    _ => p.clone(),
                };
                Ok((p, None))
            }
            SimilarityQuery::Points(points) => {
                let raw = RawPointSet {
                    spec: ScatterplotSpec::new("query_x", "query_y", None)?,
                    points: points.clone(),
                    dropped_rows: 0,
                };
                if raw
                    .points
                    .iter()
                    .any(|p| !p.x.is_finite() || !p.y.is_finite())
                {
                    return Err(Error::InvalidRequest("query points must be finite".into()));
                }
                let ps = preprocess(&raw, &self.preprocess)?;
                let counts = build_pyramid(&ps, &self.pyramid)?;
                Ok((scoring_pyramid(&counts, &self.pyramid)?, None))
            }
        }
    }

    fn weights_for(&self, weights: Option<&WeightSchedule>) -> Result<WeightSchedule> {
        match weights {
            None => Ok(self.weights.clone()),
            Some(w) if w.len() == self.pyramid.level_count() => Ok(w.clone()),
            Some(w) => Err(Error::IncompatiblePyramid(format!(
                "{} weights for {} levels",
                w.len(),
                self.pyramid.level_count()
            ))),
        }
    }

    /// Top-k plots by ascending multi-level distance to the query.
    pub fn query_similar(
        &self,
        query: &SimilarityQuery,
        k: impl Into<TopK>,
        weights: Option<&WeightSchedule>,
    ) -> Result<Vec<RankedResult>> {
        Ok(self
            .similar_inner(query, k.into(), weights, f64::INFINITY)?
            .results)
    }

    /// Like [`Collection::query_similar`], but candidates whose weighted
    /// coarsest-level distance exceeds `threshold` are dropped without
    /// evaluating finer levels. With an infinite threshold the output is
    /// identical to the unpruned query.
    pub fn query_similar_pruned(
        &self,
        query: &SimilarityQuery,
        k: impl Into<TopK>,
        weights: Option<&WeightSchedule>,
        threshold: f64,
    ) -> Result<PrunedResults> {
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::InvalidRequest(format!(
                "prune threshold must be >= 0, got {threshold}"
            )));
        }
        self.similar_inner(query, k.into(), weights, threshold)
    }

    fn similar_inner(
        &self,
        query: &SimilarityQuery,
        k: TopK,
        weights: Option<&WeightSchedule>,
        threshold: f64,
    ) -> Result<PrunedResults> {
        let limit = k.limit()?;
        let weights = self.weights_for(weights)?;
        let (reference, exclude) = self.resolve(query)?;
        let coarse_weight = weights.weights()[0];

        let mut pruned = 0;
        let mut scored = Vec::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            if threshold.is_finite() {
                let coarse =
                    coarse_weight * raw_level_distance(reference.coarsest(), e.scoring.coarsest());
                if coarse > threshold {
                    pruned += 1;
                    continue;
                }
            }
            scored.push((mld_aligned(&reference, &e.scoring, &weights), &e.spec.id));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        Ok(PrunedResults {
            results: rank(scored, limit, Score::distance),
            pruning_active: threshold.is_finite(),
            pruned,
        })
    }

    /// Top-k plots by descending number (or fraction) of points inside
    /// `region`.
    pub fn query_region(
        &self,
        region: &Region,
        k: impl Into<TopK>,
        normalized: bool,
    ) -> Result<Vec<RankedResult>> {
        let limit = k.into().limit()?;
        let mut scored: Vec<(f64, &String)> = self
            .entries
            .iter()
            .map(|e| {
                (
                    region_score(&e.points, region, normalized).value,
                    &e.spec.id,
                )
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(rank(scored, limit, Score::count))
    }
}

fn rank(scored: Vec<(f64, &String)>, limit: usize, score: fn(f64) -> Score) -> Vec<RankedResult> {
    scored
        .into_iter()
        .take(limit)
        .enumerate()
        .map(|(i, (value, id))| RankedResult {
            spec_id: id.clone(),
            score: score(value),
            rank: i + 1,
        })
        .collect()
}

fn collection_digest(
    table_name: &str,
    specs: &[ScatterplotSpec],
    pre: &PreprocessConfig,
    pyr: &PyramidConfig,
) -> Result<String> {
    let mut h = Sha256::new();
    h.update(table_name.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(specs)?);
    h.update(serde_json::to_vec(pre)?);
    h.update(serde_json::to_vec(pyr)?);
    Ok(hex::encode(&h.finalize()[..8]))
}
