//! On-disk ingestion layout.
//!
//! ```text
//! <data_dir>/<model>/model.json
//! <data_dir>/<model>/<service>/<layer>/<neuron>.json
//! ```
//!
//! Other files at the model root (such as a fixture manifest) are ignored.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::{ModelMetadata, ServiceKind};
use crate::fixture::MODEL_FILE;
use crate::store::{IngestError, IngestReport, RecordKey, Store, StoreParams};

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model {model}: {source}")]
    Ingest {
        model: String,
        #[source]
        source: IngestError,
    },
}

fn invalid(path: &Path, reason: impl Into<String>) -> LayoutError {
    LayoutError::Invalid {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LayoutError + '_ {
    move |source| LayoutError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug)]
pub struct ModelDir {
    pub root: PathBuf,
    pub meta: ModelMetadata,
    pub records: Vec<(RecordKey, Vec<u8>)>,
}

impl ModelDir {
    pub fn record_path(&self, key: &RecordKey) -> PathBuf {
        record_path(self.root.parent().unwrap_or(Path::new(".")), key)
    }
}

pub fn record_path(data_dir: &Path, key: &RecordKey) -> PathBuf {
    data_dir
        .join(&key.model)
        .join(key.service.name())
        .join(key.layer.to_string())
        .join(format!("{}.json", key.neuron))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, LayoutError> {
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        entries.push(entry.map_err(io_err(dir))?.path());
    }
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> &str {
    path.file_name().and_then(|n| n.to_str()).unwrap_or("")
}

/// Loads every model directory (one containing `model.json`) under `data_dir`.
pub fn scan_data_dir(data_dir: &Path) -> Result<Vec<ModelDir>, LayoutError> {
    let mut models = Vec::new();
    for path in sorted_entries(data_dir)? {
        if path.is_dir() && path.join(MODEL_FILE).is_file() {
            models.push(load_model_dir(&path)?);
        }
    }
    Ok(models)
}

pub fn load_model_dir(root: &Path) -> Result<ModelDir, LayoutError> {
    let meta_path = root.join(MODEL_FILE);
    let bytes = std::fs::read(&meta_path).map_err(io_err(&meta_path))?;
    let meta: ModelMetadata = serde_json::from_slice(&bytes).map_err(|e| invalid(&meta_path, e.to_string()))?;
    if meta.name != file_name(root) {
        return Err(invalid(
            &meta_path,
            format!("model name {:?} does not match its directory", meta.name),
        ));
    }

    let mut records = Vec::new();
    for service_dir in sorted_entries(root)? {
        if !service_dir.is_dir() {
            continue;
        }
        let service: ServiceKind = file_name(&service_dir)
            .parse()
            .map_err(|e: crate::domain::UnknownService| invalid(&service_dir, e.to_string()))?;
        if !ServiceKind::DATA.contains(&service) {
            return Err(invalid(&service_dir, format!("service {service} cannot be ingested")));
        }
        for layer_dir in sorted_entries(&service_dir)? {
            let layer: u32 = file_name(&layer_dir)
                .parse()
                .map_err(|_| invalid(&layer_dir, "layer directory must be a non-negative integer"))?;
            if !layer_dir.is_dir() {
                return Err(invalid(&layer_dir, "expected a directory"));
            }
            for file in sorted_entries(&layer_dir)? {
                let neuron: u32 = file_name(&file)
                    .strip_suffix(".json")
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| invalid(&file, "record files must be named <neuron>.json"))?;
                let bytes = std::fs::read(&file).map_err(io_err(&file))?;
                records.push((RecordKey::new(meta.name.clone(), service, layer, neuron), bytes));
            }
        }
    }
    Ok(ModelDir {
        root: root.to_path_buf(),
        meta,
        records,
    })
}

/// Builds a store from every model under `data_dir`.
pub fn ingest_dir(data_dir: &Path, params: StoreParams, created_at: u64) -> Result<(Store, Vec<IngestReport>), LayoutError> {
    let mut store = Store::new(params, created_at);
    let mut reports = Vec::new();
    for model in scan_data_dir(data_dir)? {
        let name = model.meta.name.clone();
        let report = store
            .ingest_model(model.meta, model.records)
            .map_err(|source| LayoutError::Ingest { model: name, source })?;
        reports.push(report);
    }
    Ok((store, reports))
}
