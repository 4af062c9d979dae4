//! On-disk response cache keyed by a SHA-256 of the full request.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::{Backend, BackendError};
use super::request::{RoleRequest, RoleResponse};
use crate::io::write_atomic;

#[derive(Serialize)]
struct KeyMaterial<'a> {
    backend_id: &'a str,
    role_kind: &'a str,
    prompt: &'a str,
    context: &'a [(String, String)],
    temperature: f64,
    sample_count: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    backend_id: String,
    samples: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(backend_id: &str, request: &RoleRequest) -> String {
        let material = KeyMaterial {
            backend_id,
            role_kind: request.role_kind.as_str(),
            prompt: &request.prompt,
            context: &request.context,
            temperature: request.temperature,
            sample_count: request.sample_count,
            seed: request.seed,
        };
        let bytes = serde_json::to_vec(&material).expect("key material serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> std::io::Result<Option<Vec<String>>> {
        match fs::read(self.path_for(key)) {
            Ok(bytes) => {
                let entry: Entry = serde_json::from_slice(&bytes).map_err(std::io::Error::other)?;
                Ok(Some(entry.samples))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn store(&self, key: &str, backend_id: &str, samples: &[String]) -> std::io::Result<()> {
        let path = self.path_for(key);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let entry = Entry { backend_id: backend_id.to_owned(), samples: samples.to_vec() };
        let bytes = serde_json::to_vec(&entry).map_err(std::io::Error::other)?;
        write_atomic(&path, &bytes).map_err(std::io::Error::other)
    }
}

/// Serves `request` from `cache` when possible, otherwise calls `backend`
/// and stores the result. Cache I/O problems fall back to an uncached call.
pub fn call_with_cache(
    request: &RoleRequest,
    backend: &dyn Backend,
    cache: Option<&ResponseCache>,
) -> Result<RoleResponse, BackendError> {
    let backend_id = backend.id().to_owned();
    let Some(cache) = cache else {
        let samples = backend.complete(request)?;
        return Ok(RoleResponse { samples, backend_id, cached: false });
    };

    let key = ResponseCache::key(&backend_id, request);
    match cache.load(&key) {
        Ok(Some(samples)) => return Ok(RoleResponse { samples, backend_id, cached: true }),
        Ok(None) => {}
        Err(e) => tracing::warn!(%key, error = %e, "response cache read failed; calling backend"),
    }
    let samples = backend.complete(request)?;
    if let Err(e) = cache.store(&key, &backend_id, &samples) {
        tracing::warn!(%key, error = %e, "response cache write failed");
    }
    Ok(RoleResponse { samples, backend_id, cached: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roles::backend::{CallCounter, FnBackend};
    use crate::roles::request::RoleKind;
    use proptest::prelude::*;

    fn request(prompt: &str, seed: u64) -> RoleRequest {
        RoleRequest::new(RoleKind::Expand, prompt, [("question", "when did little polveir win")])
            .unwrap()
            .with_seed(seed)
            .with_samples(2)
    }

    fn echo() -> CallCounter<FnBackend> {
        CallCounter::new(FnBackend::new("echo", |r: &RoleRequest| {
            Ok((0..r.sample_count).map(|i| format!("{} #{i} seed={}", r.prompt, r.seed)).collect())
        }))
    }

    #[test]
    fn hit_after_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let b = echo();
        let first = call_with_cache(&request("p", 1), &b, Some(&cache)).unwrap();
        let second = call_with_cache(&request("p", 1), &b, Some(&cache)).unwrap();
        assert!(!first.cached);
        assert!(second.cached);
        assert_eq!(first.samples, second.samples);
        assert_eq!(b.total(), 1);
    }

    #[test]
    fn key_covers_seed_and_prompt() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let b = echo();
        call_with_cache(&request("p", 1), &b, Some(&cache)).unwrap();
        assert!(!call_with_cache(&request("p", 2), &b, Some(&cache)).unwrap().cached);
        assert!(!call_with_cache(&request("q", 1), &b, Some(&cache)).unwrap().cached);
        assert_eq!(b.total(), 3);
    }

    #[test]
    fn unwritable_cache_degrades() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let cache = ResponseCache::new(blocker.join("sub"));
        let b = echo();
        let r = call_with_cache(&request("p", 1), &b, Some(&cache)).unwrap();
        assert!(!r.cached);
        assert_eq!(r.samples.len(), 2);
    }

    proptest! {
        #[test]
        fn store_load_round_trip(samples in proptest::collection::vec(".*", 0..5)) {
            let dir = tempfile::tempdir().unwrap();
            let cache = ResponseCache::new(dir.path());
            let key = ResponseCache::key("b", &request("p", 0));
            cache.store(&key, "b", &samples).unwrap();
            prop_assert_eq!(cache.load(&key).unwrap(), Some(samples));
        }
    }
}
