//! Front-end independent service layer shared by the HTTP server and the
//! command line: request and response shapes, error codes, an in-process
//! registry of datasets and collections, and on-disk collection storage.

mod api;
mod config;
mod registry;
mod store;

pub use api::{
    build_collection, execute_query, load_dataset, plot_detail, ApiError, CollectionCreated,
    CollectionRequest, Dataset, DatasetCreated, PlotDetail, Preview, PruningReport, QueryRef,
    QueryRequest, QueryResponse, ResultItem, SpecMode,
};
pub use config::{ServiceConfig, CONFIG_ENV_VAR};
pub use registry::Registry;
pub use store::{
    load_collection, save_collection, StoredCollection, StoredManifest, MANIFEST_FILE,
    PYRAMIDS_FILE, SOURCE_FILE,
};
