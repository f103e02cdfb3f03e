use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use physrisk_core::engine::{discover_runs, EnsembleStore};
use physrisk_core::risk::RiskLevels;
use physrisk_core::Result;

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestLogEntry {
    pub method: String,
    pub path: String,
    pub request_hash: Option<String>,
    pub cached: bool,
}

/// Mounted stores plus append-only caches keyed by request hash.
pub struct ApiSession {
    runs: BTreeMap<String, Arc<EnsembleStore>>,
    pub(crate) responses: Mutex<HashMap<String, Arc<(String, Vec<u8>)>>>,
    pub(crate) levels: Mutex<HashMap<String, Arc<RiskLevels>>>,
    log: Mutex<Vec<RequestLogEntry>>,
}

impl ApiSession {
    /// Open every run directory under `root` (or `root` itself).
    pub fn mount(root: &Path) -> Result<Self> {
        let mut runs = BTreeMap::new();
        for dir in discover_runs(root)? {
            let store = EnsembleStore::open(&dir)?;
            runs.insert(store.run_id.clone(), Arc::new(store));
        }
        Ok(Self::from_stores(runs.into_values()))
    }

    pub fn from_stores(stores: impl IntoIterator<Item = Arc<EnsembleStore>>) -> Self {
        Self {
            runs: stores.into_iter().map(|s| (s.run_id.clone(), s)).collect(),
            responses: Mutex::default(),
            levels: Mutex::default(),
            log: Mutex::default(),
        }
    }

    pub fn run_ids(&self) -> Vec<String> {
        self.runs.keys().cloned().collect()
    }

    pub fn run(&self, id: &str) -> std::result::Result<Arc<EnsembleStore>, ApiError> {
        self.runs
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown run `{id}`")))
    }

    pub fn stores(&self) -> impl Iterator<Item = &Arc<EnsembleStore>> {
        self.runs.values()
    }

    pub(crate) fn record(&self, entry: RequestLogEntry) {
        self.log.lock().unwrap().push(entry);
    }

    pub fn request_log(&self) -> Vec<RequestLogEntry> {
        self.log.lock().unwrap().clone()
    }
}
