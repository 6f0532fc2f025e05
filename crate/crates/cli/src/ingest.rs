use std::path::{Path, PathBuf};

use neuronhub_core::layout::{ingest_dir, LayoutError};
use neuronhub_core::store::{IngestError, IngestReport, StoreError, StoreParams};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestFailure {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("writing store: {0}")]
    Write(#[from] StoreError),
}

#[derive(Debug, Serialize)]
pub struct IngestOutcome {
    pub store: PathBuf,
    pub records: usize,
    pub models: Vec<IngestReport>,
}

#[derive(Debug, Serialize)]
pub struct RejectedFile {
    pub key: String,
    pub path: PathBuf,
    pub reason: String,
}

/// Builds a store from `data_dir` and writes it to `store_path` with a
/// rename, so the file is either absent/unchanged or complete.
pub fn cmd_ingest(data_dir: &Path, store_path: &Path, params: StoreParams, created_at: u64) -> Result<IngestOutcome, IngestFailure> {
    let (store, models) = ingest_dir(data_dir, params, created_at)?;
    store.save(store_path)?;
    Ok(IngestOutcome {
        store: store_path.to_path_buf(),
        records: store.record_count(),
        models,
    })
}

/// JSON description of a failure, with record keys mapped back to files.
pub fn failure_report(err: &IngestFailure, data_dir: &Path) -> serde_json::Value {
    let rejected: Vec<RejectedFile> = match err {
        IngestFailure::Layout(LayoutError::Ingest {
            source: IngestError::ValidationFailed { rejected },
            ..
        }) => rejected
            .iter()
            .map(|r| RejectedFile {
                key: r.key.clone(),
                path: data_dir.join(format!("{}.json", r.key)),
                reason: r.reason.clone(),
            })
            .collect(),
        _ => Vec::new(),
    };
    serde_json::json!({
        "error": err.to_string(),
        "rejected": rejected,
    })
}
