//! On-disk layout of a built collection:
//!
//! - `manifest.json`: ids, the effective request, parse settings and the
//!   collection manifest
//! - `source.csv`: the uploaded bytes, verbatim
//! - `pyramids.bin`: counts pyramids in the binary cache format

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::api::{load_dataset, CollectionRequest, Dataset};
use super::ServiceConfig;
use crate::engine::{Collection, CollectionManifest};
use crate::error::{Error, Result};
use crate::ingest::CsvFormat;
use crate::representation::{decode_pyramids, encode_pyramids};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOURCE_FILE: &str = "source.csv";
pub const PYRAMIDS_FILE: &str = "pyramids.bin";

const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredManifest {
    pub version: u32,
    pub dataset_id: String,
    pub csv: CsvFormat,
    pub categorical_threshold: usize,
    /// With service defaults filled in.
    pub request: CollectionRequest,
    pub collection: CollectionManifest,
}

#[derive(Debug)]
pub struct StoredCollection {
    pub manifest: StoredManifest,
    pub dataset: Dataset,
    pub collection: Collection,
}

pub fn save_collection(
    dir: &Path,
    csv: &[u8],
    dataset: &Dataset,
    request: &CollectionRequest,
    collection: &Collection,
    cfg: &ServiceConfig,
) -> Result<StoredManifest> {
    let manifest = StoredManifest {
        version: STORE_VERSION,
        dataset_id: dataset.id.clone(),
        csv: cfg.csv,
        categorical_threshold: cfg.categorical_threshold,
        request: request.effective(cfg),
        collection: collection.manifest(),
    };
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SOURCE_FILE), csv)?;
    fs::write(
        dir.join(PYRAMIDS_FILE),
        encode_pyramids(&collection.counts_pyramids())?,
    )?;
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Reloads a saved collection. Points are re-derived from the stored CSV
/// and checked against the cached pyramids.
pub fn load_collection(dir: &Path) -> Result<StoredCollection> {
    let manifest: StoredManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if manifest.version != STORE_VERSION {
        return Err(Error::CacheFormat(format!(
            "store version {} is not supported",
            manifest.version
        )));
    }
    let csv = fs::read(dir.join(SOURCE_FILE))?;
    let cfg = ServiceConfig {
        csv: manifest.csv,
        categorical_threshold: manifest.categorical_threshold,
        ..ServiceConfig::default()
    };
    let dataset = load_dataset(&csv, &cfg).map_err(|e| Error::CacheFormat(e.message))?;
    if dataset.id != manifest.dataset_id {
        return Err(Error::CacheFormat(format!(
            "source.csv hashes to {}, manifest names {}",
            dataset.id, manifest.dataset_id
        )));
    }
    let pyramids = decode_pyramids(&fs::read(dir.join(PYRAMIDS_FILE))?)?;
    let m = &manifest.collection;
    let collection = Collection::restore(
        m.collection_id.clone(),
        &dataset.table,
        &m.specs,
        &m.preprocess,
        &m.pyramid,
        pyramids,
    )?;
    Ok(StoredCollection {
        manifest,
        dataset,
        collection,
    })
}
