//! Ensemble orchestration, run stores and read-only summaries.

pub mod config;
pub mod run;
pub mod store;
pub mod summary;

use std::path::Path;

pub use config::{validate_config, Diagnostic, RunConfig};
pub use run::{run_ensemble, RunOptions};
pub use store::EnsembleStore;

use crate::error::{Error, Result};
use crate::risk::RiskIndexSpec;

pub fn load_thresholds(path: &Path) -> Result<RiskIndexSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RiskIndexSpec::parse(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(path, line, message),
        other => other,
    })
}

/// Every run directory directly under `root` (or `root` itself), sorted.
pub fn discover_runs(root: &Path) -> Result<Vec<std::path::PathBuf>> {
    if EnsembleStore::is_run_dir(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let p = entry.map_err(|e| Error::io(root, e))?.path();
        if p.is_dir() && EnsembleStore::is_run_dir(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
