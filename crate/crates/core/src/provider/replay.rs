//! Content-addressed response cache and the replay backend built on it.
//!
//! Layout: one `<content key>.json` file per request holding the request,
//! the result and the recording time. Writes go through a temporary file
//! and a rename, so concurrent writers of the same key never expose a
//! half-written entry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{
    content_key, BackendKind, CompletionBackend, CompletionRequest, CompletionResult, ProviderError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: CompletionRequest,
    pub result: CompletionResult,
    pub recorded_at_unix: u64,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| cache_error(&dir, e))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, ProviderError> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_error(&path, e)),
        };
        let entry: CacheEntry =
            serde_json::from_slice(&bytes).map_err(|e| cache_error(&path, e))?;
        if entry.key != key {
            return Err(cache_error(&path, "stored key does not match file name"));
        }
        Ok(Some(entry))
    }

    pub fn put(
        &self,
        request: &CompletionRequest,
        result: &CompletionResult,
    ) -> Result<CacheEntry, ProviderError> {
        let key = content_key(request);
        let entry = CacheEntry {
            key: key.clone(),
            request: request.clone(),
            result: result.clone(),
            recorded_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let path = self.path_for(&key);
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let json = serde_json::to_vec_pretty(&entry).map_err(|e| cache_error(&path, e))?;
        let mut file = fs::File::create(&tmp).map_err(|e| cache_error(&tmp, e))?;
        file.write_all(&json).map_err(|e| cache_error(&tmp, e))?;
        file.sync_all().map_err(|e| cache_error(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| cache_error(&path, e))?;
        Ok(entry)
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn cache_error(path: &Path, e: impl std::fmt::Display) -> ProviderError {
    ProviderError::Cache {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Serves completions from a [`ResponseCache`].
///
/// Without an upstream a miss is an [`ProviderError::Uncached`] error. With
/// an upstream (record mode) misses are forwarded and the result stored.
pub struct ReplayBackend {
    cache: ResponseCache,
    upstream: Option<Arc<dyn CompletionBackend>>,
}

impl ReplayBackend {
    pub fn replay_only(cache: ResponseCache) -> Self {
        ReplayBackend {
            cache,
            upstream: None,
        }
    }

    pub fn recording(cache: ResponseCache, upstream: Arc<dyn CompletionBackend>) -> Self {
        ReplayBackend {
            cache,
            upstream: Some(upstream),
        }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        let key = content_key(request);
        if let Some(entry) = self.cache.get(&key)? {
            return Ok(CompletionResult {
                backend: BackendKind::Replay,
                ..entry.result
            });
        }
        let Some(upstream) = &self.upstream else {
            return Err(ProviderError::Uncached { key });
        };
        let result = upstream.complete(request)?;
        self.cache.put(request, &result)?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{MockBackend, MockReply};

    fn request(user: &str) -> CompletionRequest {
        CompletionRequest {
            model: "m".into(),
            system_prompt: "s".into(),
            user_prompt: user.into(),
            temperature: 0.1,
            max_tokens: 10,
        }
    }

    #[test]
    fn miss_without_upstream_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let backend = ReplayBackend::replay_only(ResponseCache::open(dir.path()).unwrap());
        let err = backend.complete(&request("a")).unwrap_err();
        assert!(matches!(err, ProviderError::Uncached { .. }));
    }

    #[test]
    fn record_then_replay_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let mock = Arc::new(MockBackend::with_default(
            MockReply::text("VULNERABILITY_FOUND: yes").tokens(592, 482),
        ));
        let recorder = ReplayBackend::recording(cache.clone(), mock.clone());
        let first = recorder.complete(&request("a")).unwrap();
        assert_eq!(first.backend, BackendKind::Mock);
        assert_eq!(cache.len(), 1);

        let replay = ReplayBackend::replay_only(cache);
        let second = replay.complete(&request("a")).unwrap();
        assert_eq!(second.text, first.text);
        assert_eq!(
            (second.input_tokens, second.output_tokens),
            (first.input_tokens, first.output_tokens)
        );
        assert_eq!(second.backend, BackendKind::Replay);
        // Recorder now hits the cache instead of the upstream.
        recorder.complete(&request("a")).unwrap();
        assert_eq!(mock.call_count(), 1);
    }

    #[test]
    fn corrupt_entry_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = content_key(&request("a"));
        fs::write(dir.path().join(format!("{key}.json")), "{").unwrap();
        assert!(matches!(cache.get(&key), Err(ProviderError::Cache { .. })));
    }
}
