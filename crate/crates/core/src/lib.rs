//! Pattern search over scatterplot collections.
//!
//! A table is split into candidate scatterplots (all measure pairs, or one
//! plot per category value). Each plot is normalized to the unit square and
//! binned into a pyramid of square heatmaps at dyadic resolutions. Queries rank the collection either by how many points
//! fall inside a drawn polygon or by the multi-level distance between
//! heatmap pyramids.

pub mod engine;
pub mod error;
pub mod ingest;
pub mod preprocess;
pub mod representation;
pub mod scoring;
pub mod service;

pub use engine::{
    Collection, CollectionManifest, PlotEntry, PrunedResults, RankedResult, SimilarityQuery, TopK,
};
pub use error::{Error, Result};
pub use ingest::{
    AttributeCatalog, AttributeKind, Column, CsvFormat, RawPointSet, ScatterplotSpec, SpecFilter,
    Table,
};
pub use preprocess::{Extent, Point, PointSet, PreprocessConfig};
pub use representation::{HeatmapKind, HeatmapLevel, HeatmapPyramid, PyramidConfig};
pub use scoring::{Direction, Region, Score, WeightSchedule};
