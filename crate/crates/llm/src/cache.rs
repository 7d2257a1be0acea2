use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Backend, CompletionResult, CompletionSource, GatewayError, PromptRequest};

pub const CACHE_FILE_NAME: &str = "llm_cache.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub value: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

/// SHA-256 over a canonical JSON array of every keyed field.
pub fn cache_key(request: &PromptRequest) -> String {
    let canonical = serde_json::json!([
        request.model_id,
        request.system_text,
        request.user_text,
        request.max_tokens,
        request.temperature,
        request.seed,
    ]);
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

/// Append-only JSON-lines store. Readers share a lock; appends go through
/// a single writer handle.
#[derive(Debug)]
pub struct ReplayCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<File>,
}

impl ReplayCache {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| GatewayError::CacheCorrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message,
                };
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if entry.key.len() != 64 || !entry.key.bytes().all(|b| b.is_ascii_hexdigit()) {
                    return Err(corrupt(format!("bad key {:?}", entry.key)));
                }
                entries.entry(entry.key).or_insert(entry.value);
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ReplayCache { path: path.to_path_buf(), entries: RwLock::new(entries), writer: Mutex::new(writer) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Persist an entry; a key that is already present keeps its first value.
    pub fn put(&self, key: &str, value: &str) -> Result<(), GatewayError> {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if self.get(key).is_some() {
            return Ok(());
        }
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let entry = CacheEntry { key: key.to_string(), value: value.to_string(), created_at };
        let line = serde_json::to_string(&entry).map_err(|e| GatewayError::Malformed(e.to_string()))?;
        writeln!(writer, "{line}")?;
        writer.flush()?;
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(entry.key, entry.value);
        Ok(())
    }
}

/// Serve from the cache when possible, otherwise ask the backend and record
/// the answer before returning it.
pub fn cached_complete(
    request: &PromptRequest,
    backend: &Backend,
    cache: &ReplayCache,
) -> Result<CompletionResult, GatewayError> {
    request.validate()?;
    let key = cache_key(request);
    if let Some(text) = cache.get(&key) {
        return Ok(CompletionResult { text, source: CompletionSource::Cache, latency_ms: Some(0) });
    }
    let result = backend.complete(request)?;
    cache.put(&key, &result.text)?;
    Ok(result)
}
