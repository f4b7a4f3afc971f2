use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::ServiceConfig;
use crate::engine::{Collection, CollectionManifest, PlotEntry, SimilarityQuery, TopK};
use crate::error::Error;
use crate::ingest::{
    classify_attributes, enumerate_by_category, enumerate_pairwise, load_table, AttributeCatalog,
    ScatterplotSpec, Table,
};
use crate::preprocess::{sample, Extent, Point, PreprocessConfig};
use crate::representation::{bin, HeatmapKind, HeatmapLevel, HeatmapPyramid, PyramidConfig};
use crate::scoring::{Region, Score, WeightSchedule};

/// The error body every endpoint and CLI command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn status(&self) -> u16 {
        match self.code.as_str() {
            "not-found" => 404,
            "capacity-exceeded" => 413,
            "io-error" | "cache-format" | "internal" => 500,
            _ => 400,
        }
    }

    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self.code.as_str() {
            "parse-error" | "empty-table" => 3,
            "not-found" => 4,
            "invalid-region" => 5,
            "capacity-exceeded" => 6,
            "io-error" | "cache-format" => 7,
            _ => 2,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let detail = match &err {
            Error::Parse { row, .. } => Some(json!({ "row": row })),
            Error::Cardinality {
                attribute,
                distinct,
                max,
            } => Some(json!({ "attribute": attribute, "distinct": distinct, "max": max })),
            Error::NotFound { kind, id } => Some(json!({ "kind": kind, "id": id })),
            Error::UnknownAttribute(name) => Some(json!({ "attribute": name })),
            _ => None,
        };
        Self {
            code: err.code().to_string(),
            message: err.to_string(),
            detail,
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn short_digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(&h.finalize()[..8])
}

/// An uploaded table and its attribute catalog. The id is derived from the
/// CSV bytes, so re-uploading the same file yields the same dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub table: Table,
    pub catalog: AttributeCatalog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCreated {
    pub dataset_id: String,
    pub row_count: usize,
    pub catalog: AttributeCatalog,
}

impl Dataset {
    pub fn created(&self) -> DatasetCreated {
        DatasetCreated {
            dataset_id: self.id.clone(),
            row_count: self.table.row_count(),
            catalog: self.catalog.clone(),
        }
    }
}

pub fn load_dataset(csv: &[u8], cfg: &ServiceConfig) -> ApiResult<Dataset> {
    let id = format!("ds-{}", short_digest(&[csv]));
    let table = load_table(&id, csv, cfg.csv)?;
    let catalog = classify_attributes(&table, &BTreeMap::new(), cfg.categorical_threshold)?;
    Ok(Dataset { id, table, catalog })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SpecMode {
    Pairwise,
    CategorySplit { x: String, y: String, cat: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionRequest {
    #[serde(flatten)]
    pub mode: SpecMode,
    #[serde(default)]
    pub preprocess: Option<PreprocessConfig>,
    #[serde(default)]
    pub pyramid: Option<PyramidConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionCreated {
    pub dataset_id: String,
    pub mode: SpecMode,
    pub manifest: CollectionManifest,
}

impl CollectionRequest {
    pub fn pairwise() -> Self {
        Self {
            mode: SpecMode::Pairwise,
            preprocess: None,
            pyramid: None,
        }
    }

    pub fn category_split(x: &str, y: &str, cat: &str) -> Self {
        Self {
            mode: SpecMode::CategorySplit {
                x: x.into(),
                y: y.into(),
                cat: cat.into(),
            },
            preprocess: None,
            pyramid: None,
        }
    }

    /// The request with service defaults filled in.
    pub fn effective(&self, cfg: &ServiceConfig) -> CollectionRequest {
        CollectionRequest {
            mode: self.mode.clone(),
            preprocess: Some(
                self.preprocess
                    .clone()
                    .unwrap_or_else(|| cfg.preprocess.clone()),
            ),
            pyramid: Some(self.pyramid.unwrap_or(cfg.pyramid)),
        }
    }

    /// Deterministic id of the collection this request builds on `dataset`.
    pub fn collection_id(&self, dataset_id: &str, cfg: &ServiceConfig) -> ApiResult<String> {
        let eff = serde_json::to_vec(&self.effective(cfg)).map_err(Error::from)?;
        Ok(format!(
            "col-{}",
            short_digest(&[dataset_id.as_bytes(), &eff])
        ))
    }

    pub fn specs(&self, dataset: &Dataset, cfg: &ServiceConfig) -> ApiResult<Vec<ScatterplotSpec>> {
        let specs = match &self.mode {
            SpecMode::Pairwise => enumerate_pairwise(&dataset.catalog),
            SpecMode::CategorySplit { x, y, cat } => enumerate_by_category(
                &dataset.table,
                &dataset.catalog,
                x,
                y,
                cat,
                cfg.max_category_values,
            )?,
        };
        if specs.is_empty() {
            return Err(Error::InvalidSpec("the request produces no scatterplots".into()).into());
        }
        if specs.len() > cfg.max_specs {
            return Err(Error::CapacityExceeded(format!(
                "{} scatterplots requested, limit is {}",
                specs.len(),
                cfg.max_specs
            ))
            .into());
        }
        Ok(specs)
    }
}

pub fn build_collection(
    dataset: &Dataset,
    req: &CollectionRequest,
    cfg: &ServiceConfig,
) -> ApiResult<Collection> {
    let eff = req.effective(cfg);
    let specs = req.specs(dataset, cfg)?;
    let pre = eff.preprocess.expect("filled in");
    let pyr = eff.pyramid.expect("filled in");
    let id = req.collection_id(&dataset.id, cfg)?;
    Ok(Collection::build(&dataset.table, &specs, &pre, &pyr)?.with_id(id))
}

/// Similarity reference on the wire: a member spec id or inline points in
/// data units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryRef {
    Spec(String),
    Points(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum QueryRequest {
    Region {
        /// `[[x, y], ...]` in the unit square; a closing vertex is optional.
        polygon: Vec<Point>,
        #[serde(default)]
        k: Option<TopK>,
        #[serde(default)]
        normalized: bool,
    },
    Similar {
        #[serde(rename = "ref")]
        reference: QueryRef,
        #[serde(default)]
        k: Option<TopK>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        prune_threshold: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preview {
    pub point_count: usize,
    pub source_extent: Extent,
    /// Coarse density heatmap.
    pub heatmap: HeatmapLevel,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultItem {
    pub spec_id: String,
    pub rank: usize,
    pub score: Score,
    pub preview: Preview,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningReport {
    pub threshold: f64,
    pub pruned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub collection_id: String,
    pub query_type: String,
    pub results: Vec<ResultItem>,
    pub pruning: Option<PruningReport>,
}

fn preview(entry: &PlotEntry, cfg: &ServiceConfig, seed: u64) -> ApiResult<Preview> {
    let ps = &entry.points;
    let counts = bin(ps, cfg.preview_resolution)?;
    let n = ps.len() as f64;
    let cells = counts
        .cells()
        .iter()
        .map(|c| if n > 0.0 { c / n } else { 0.0 })
        .collect();
    let heatmap = HeatmapLevel::from_cells(cfg.preview_resolution, HeatmapKind::Density, cells)?;
    Ok(Preview {
        point_count: ps.len(),
        source_extent: ps.source_extent,
        heatmap,
        points: sample(ps, cfg.preview_points, seed)?.points,
    })
}

/// Runs a wire query against a collection. Shared by HTTP and CLI.
pub fn execute_query(
    collection: &Collection,
    req: &QueryRequest,
    cfg: &ServiceConfig,
) -> ApiResult<QueryResponse> {
    let default_k = TopK::Count(cfg.default_k);
    let (query_type, ranked, pruning) = match req {
        QueryRequest::Region {
            polygon,
            k,
            normalized,
        } => {
            let region = Region::new(polygon.clone())?;
            let ranked = collection.query_region(&region, k.unwrap_or(default_k), *normalized)?;
            ("region", ranked, None)
        }
        QueryRequest::Similar {
            reference,
            k,
            weights,
            prune_threshold,
        } => {
            let query = match reference {
                QueryRef::Spec(id) => SimilarityQuery::Spec(id.clone()),
                QueryRef::Points(points) => SimilarityQuery::Points(points.clone()),
            };
            let weights = weights.clone().map(WeightSchedule::new).transpose()?;
            let k = k.unwrap_or(default_k);
            match prune_threshold {
                None => (
                    "similar",
                    collection.query_similar(&query, k, weights.as_ref())?,
                    None,
                ),
                Some(t) => {
                    let out = collection.query_similar_pruned(&query, k, weights.as_ref(), *t)?;
                    let report = PruningReport {
                        threshold: *t,
                        pruned: out.pruned,
                    };
                    ("similar", out.results, Some(report))
                }
            }
        }
    };
    let seed = collection.preprocess_config().seed;
    let results = ranked
        .into_iter()
        .map(|r| {
            let entry = collection.entry(&r.spec_id)?;
            Ok(ResultItem {
                preview: preview(entry, cfg, seed)?,
                spec_id: r.spec_id,
                rank: r.rank,
                score: r.score,
            })
        })
        .collect::<ApiResult<Vec<_>>>()?;
    Ok(QueryResponse {
        collection_id: collection.id().to_string(),
        query_type: query_type.to_string(),
        results,
        pruning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotDetail {
    pub spec: ScatterplotSpec,
    pub empty: bool,
    pub dropped_rows: usize,
    pub n_before_sampling: usize,
    pub source_extent: Extent,
    /// Preprocessed points in the unit square.
    pub points: Vec<Point>,
    pub pyramid: HeatmapPyramid,
}

pub fn plot_detail(collection: &Collection, spec_id: &str) -> ApiResult<PlotDetail> {
    let e = collection.entry(spec_id)?;
    Ok(PlotDetail {
        spec: e.spec.clone(),
        empty: e.is_empty(),
        dropped_rows: e.dropped_rows,
        n_before_sampling: e.points.n_before_sampling,
        source_extent: e.points.source_extent,
        points: e.points.points.clone(),
        pyramid: e.pyramid.clone(),
    })
}
