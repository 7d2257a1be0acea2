//! Single-file checkpoints: magic, format version, a JSON manifest, then a
//! little-endian f32 payload.
//!
//! ```text
//! b"LARDOCKP" | u32 version | u64 manifest length | manifest JSON | payload
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use lardo_nn::{ParameterStore, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"LARDOCKP";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated: {0}")]
    Truncated(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("tensor {name:?} overlaps the previous tensor or leaves a gap at byte {offset}")]
    Overlap { name: String, offset: u64 },
    #[error("config digest mismatch: checkpoint {found}, config {expected}")]
    Digest { found: String, expected: String },
    #[error("{0}")]
    Store(#[from] lardo_nn::NnError),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: u64,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_digest: String,
    pub tensors: Vec<TensorRecord>,
    pub payload_bytes: u64,
    /// Free-form string metadata, e.g. label standardization.
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_digest: String,
    pub metadata: BTreeMap<String, String>,
    pub store: ParameterStore,
}

/// sha256 of the serialized config.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("configs serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl Checkpoint {
    pub fn check_digest(&self, expected: &str) -> Result<(), CheckpointError> {
        if self.config_digest == expected {
            Ok(())
        } else {
            Err(CheckpointError::Digest { found: self.config_digest.clone(), expected: expected.to_string() })
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::with_capacity(self.store.len());
        let mut payload = Vec::new();
        for (name, e) in self.store.iter() {
            tensors.push(TensorRecord {
                name: name.to_string(),
                shape: e.value.shape().to_vec(),
                offset: payload.len() as u64,
                trainable: e.trainable,
            });
            for &v in e.value.data() {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config_digest: self.config_digest.clone(),
            tensors,
            payload_bytes: payload.len() as u64,
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(HEADER_LEN + json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        out
    }

    /// Parses and validates the whole manifest before touching the payload.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < HEADER_LEN {
            return Err(CheckpointError::Truncated(format!("{} header bytes", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version { found: version, expected: FORMAT_VERSION });
        }
        let manifest_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let rest = &bytes[HEADER_LEN..];
        if manifest_len > rest.len() as u64 {
            return Err(CheckpointError::Truncated("manifest".into()));
        }
        let (json, payload) = rest.split_at(manifest_len as usize);
        let manifest: Manifest = serde_json::from_slice(json).map_err(|e| CheckpointError::Manifest(e.to_string()))?;
        if manifest.format_version != version {
            return Err(CheckpointError::Manifest("version differs from header".into()));
        }
        let mut expected_offset = 0u64;
        for t in &manifest.tensors {
            if t.offset != expected_offset {
                return Err(CheckpointError::Overlap { name: t.name.clone(), offset: t.offset });
            }
            let count = t.shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
            let bytes = count.and_then(|c| c.checked_mul(4)).ok_or_else(|| CheckpointError::Manifest(format!("shape of {:?}", t.name)))?;
            expected_offset = expected_offset
                .checked_add(bytes)
                .ok_or_else(|| CheckpointError::Manifest("payload size overflows".into()))?;
        }
        if expected_offset != manifest.payload_bytes {
            return Err(CheckpointError::Manifest(format!(
                "tensors cover {expected_offset} bytes, manifest declares {}",
                manifest.payload_bytes
            )));
        }
        if (payload.len() as u64) < manifest.payload_bytes {
            return Err(CheckpointError::Truncated(format!("payload has {} of {} bytes", payload.len(), manifest.payload_bytes)));
        }
        if (payload.len() as u64) > manifest.payload_bytes {
            return Err(CheckpointError::Manifest("trailing bytes after payload".into()));
        }

        let mut store = ParameterStore::new();
        for t in &manifest.tensors {
            let start = t.offset as usize;
            let n: usize = t.shape.iter().product();
            let data = payload[start..start + 4 * n]
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
                .collect();
            store.insert(&t.name, Tensor::new(t.shape.clone(), data)?, t.trainable)?;
        }
        Ok(Checkpoint { config_digest: manifest.config_digest, metadata: manifest.metadata, store })
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), CheckpointError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, checkpoint.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
