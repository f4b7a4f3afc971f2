//! Shared fixtures for the benchmarks.

use scatterquery_core::service::{
    build_collection, load_dataset, CollectionRequest, ServiceConfig,
};
use scatterquery_core::Collection;

/// 20 measures, 400 rows.
pub const COMMUNITIES_CSV: &[u8] = include_bytes!("../../core/tests/fixtures/communities.csv");

/// Pairwise collection over the 20-measure fixture: 190 plots at
/// resolutions 2..64.
pub fn communities_collection() -> Collection {
    let cfg = ServiceConfig::default();
    let ds = load_dataset(COMMUNITIES_CSV, &cfg).expect("fixture parses");
    build_collection(&ds, &CollectionRequest::pairwise(), &cfg).expect("fixture builds")
}
