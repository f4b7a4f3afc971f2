use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use super::api::{
    build_collection, execute_query, load_dataset, plot_detail, ApiError, CollectionCreated,
    CollectionRequest, Dataset, DatasetCreated, PlotDetail, QueryRequest, QueryResponse,
};
use super::ServiceConfig;
use crate::engine::Collection;
use crate::error::Error;

/// In-memory store behind the HTTP service.
///
/// Collections become visible only once fully built, so concurrent queries
/// never observe a partial collection. Builds for the same dataset are
/// serialized; equal requests resolve to the already published collection.
#[derive(Debug, Default)]
pub struct Registry {
    config: ServiceConfig,
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    collections: RwLock<HashMap<String, Arc<Collection>>>,
    build_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn missing(kind: &'static str, id: &str) -> ApiError {
    Error::NotFound {
        kind,
        id: id.to_string(),
    }
    .into()
}

impl Registry {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn upload_dataset(&self, csv: &[u8]) -> Result<DatasetCreated, ApiError> {
        let ds = load_dataset(csv, &self.config)?;
        let created = ds.created();
        self.datasets
            .write()
            .expect("dataset map poisoned")
            .entry(ds.id.clone())
            .or_insert_with(|| Arc::new(ds));
        Ok(created)
    }

    pub fn dataset(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        self.datasets
            .read()
            .expect("dataset map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| missing("dataset", id))
    }

    pub fn collection(&self, id: &str) -> Result<Arc<Collection>, ApiError> {
        self.collections
            .read()
            .expect("collection map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| missing("collection", id))
    }

    /// Registers an externally built collection, e.g. one loaded from disk.
    pub fn insert_collection(&self, collection: Collection) -> Arc<Collection> {
        let c = Arc::new(collection);
        self.collections
            .write()
            .expect("collection map poisoned")
            .insert(c.id().to_string(), c.clone());
        c
    }

    pub fn create_collection(
        &self,
        dataset_id: &str,
        req: &CollectionRequest,
    ) -> Result<CollectionCreated, ApiError> {
        let ds = self.dataset(dataset_id)?;
        let id = req.collection_id(&ds.id, &self.config)?;
        let lock = self
            .build_locks
            .lock()
            .expect("build lock map poisoned")
            .entry(ds.id.clone())
            .or_default()
            .clone();
        let _guard = lock.lock().expect("build lock poisoned");

        let collection = match self.collection(&id) {
            Ok(c) => c,
            Err(_) => self.insert_collection(build_collection(&ds, req, &self.config)?),
        };
        Ok(CollectionCreated {
            dataset_id: ds.id.clone(),
            mode: req.mode.clone(),
            manifest: collection.manifest(),
        })
    }

    pub fn query(
        &self,
        collection_id: &str,
        req: &QueryRequest,
    ) -> Result<QueryResponse, ApiError> {
        let c = self.collection(collection_id)?;
        execute_query(&c, req, &self.config)
    }

    pub fn plot(&self, collection_id: &str, spec_id: &str) -> Result<PlotDetail, ApiError> {
        let c = self.collection(collection_id)?;
        plot_detail(&c, spec_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    const CSV: &[u8] = b"a,b,c\n1,2,3\n2,1,5\n3,4,4\n4,3,1\n5,6,2\n6,5,7\n7,8,6\n8,7,9\n\
        9,9,8\n10,12,11\n11,10,10\n12,11,12\n13,13,14\n14,15,13\n15,14,15\n16,16,17\n\
        17,18,16\n18,17,18\n19,20,19\n20,19,21\n21,21,20\n22,22,22\n";

    #[test]
    fn unknown_ids_are_not_found() {
        let reg = Registry::new(ServiceConfig::default());
        let err = reg
            .create_collection("ds-missing", &CollectionRequest::pairwise())
            .unwrap_err();
        assert_eq!(err.status(), 404);
        assert_eq!(reg.plot("col-x", "a~b").unwrap_err().status(), 404);
    }

    #[test]
    fn concurrent_builds_publish_one_collection() {
        let reg = Arc::new(Registry::new(ServiceConfig::default()));
        let ds = reg.upload_dataset(CSV).unwrap().dataset_id;
        let ids: Vec<String> = (0..4)
            .map(|_| {
                let reg = reg.clone();
                let ds = ds.clone();
                thread::spawn(move || {
                    reg.create_collection(&ds, &CollectionRequest::pairwise())
                        .unwrap()
                        .manifest
                        .collection_id
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join().unwrap())
            .collect();
        assert!(ids.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(reg.collections.read().unwrap().len(), 1);
        let req: QueryRequest = serde_json::from_str(r#"{"type":"similar","ref":"a~b"}"#).unwrap();
        assert_eq!(reg.query(&ids[0], &req).unwrap().results.len(), 2);
    }
}
