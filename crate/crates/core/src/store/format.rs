//! Binary layout of the store file. All integers little-endian.
//!
//! ```text
//! magic            8 bytes  "NRNSTORE"
//! format_version   u32
//! manifest         u64 length + JSON
//! per model, in manifest order:
//!   token index    u64 length + JSON
//!   record count   u64
//!   per record, in key order:
//!     service u8, layer u32, neuron u32, payload u32 length + bytes
//! ```

use std::collections::BTreeMap;

use super::{ModelEntry, Store, StoreError, StoreManifest};
use crate::domain::{NeuronId, ServiceKind};
use crate::search::TokenIndex;

pub const MAGIC: &[u8; 8] = b"NRNSTORE";
pub const FORMAT_VERSION: u32 = 1;

fn service_code(service: ServiceKind) -> u8 {
    match service {
        ServiceKind::Metadata => 0,
        ServiceKind::Neuron2Graph => 1,
        ServiceKind::Neuroscope => 2,
        ServiceKind::NeuronExplainer => 3,
        ServiceKind::All => unreachable!("`all` is never stored"),
    }
}

fn service_from_code(code: u8) -> Result<ServiceKind, StoreError> {
    ServiceKind::CONCRETE
        .get(code as usize)
        .copied()
        .ok_or_else(|| StoreError::Corrupt(format!("unknown service code {code}")))
}

pub(super) fn encode(store: &Store) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let manifest = serde_json::to_vec(&store.manifest()).expect("manifest serializes");
    put_blob64(&mut out, &manifest);
    for entry in store.models.values() {
        let index = serde_json::to_vec(&entry.index).expect("index serializes");
        put_blob64(&mut out, &index);
        out.extend_from_slice(&(entry.records.len() as u64).to_le_bytes());
        for ((service, id), payload) in &entry.records {
            out.push(service_code(*service));
            out.extend_from_slice(&id.layer.to_le_bytes());
            out.extend_from_slice(&id.neuron.to_le_bytes());
            out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
            out.extend_from_slice(payload);
        }
    }
    out
}

fn put_blob64(out: &mut Vec<u8>, blob: &[u8]) {
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(blob);
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        if self.bytes.len() < n {
            return Err(StoreError::Corrupt("unexpected end of file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len64(&mut self) -> Result<usize, StoreError> {
        usize::try_from(self.u64()?).map_err(|_| StoreError::Corrupt("length overflow".into()))
    }

    fn blob64(&mut self) -> Result<&'a [u8], StoreError> {
        let n = self.len64()?;
        self.take(n)
    }
}

fn corrupt(e: serde_json::Error) -> StoreError {
    StoreError::Corrupt(e.to_string())
}

pub(super) fn decode(bytes: &[u8]) -> Result<Store, StoreError> {
    let mut r = Reader { bytes };
    if r.take(MAGIC.len()).map_err(|_| StoreError::BadMagic)? != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(StoreError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: StoreManifest = serde_json::from_slice(r.blob64()?).map_err(corrupt)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(StoreError::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }

    let mut models = BTreeMap::new();
    for meta in &manifest.models {
        let index: TokenIndex = serde_json::from_slice(r.blob64()?).map_err(corrupt)?;
        let count = r.len64()?;
        let mut records = BTreeMap::new();
        for _ in 0..count {
            let service = service_from_code(r.u8()?)?;
            let id = NeuronId::new(r.u32()?, r.u32()?);
            meta.validate_path(id.layer.into(), id.neuron.into())
                .map_err(|e| StoreError::Corrupt(format!("{}: {e}", meta.name)))?;
            let len = r.u32()? as usize;
            records.insert((service, id), r.take(len)?.to_vec());
        }
        models.insert(
            meta.name.clone(),
            ModelEntry {
                meta: meta.clone(),
                index,
                records,
            },
        );
    }
    if !r.bytes.is_empty() {
        return Err(StoreError::Corrupt("trailing bytes".into()));
    }
    Ok(Store {
        params: manifest.params(),
        created_at: manifest.created_at,
        models,
    })
}
