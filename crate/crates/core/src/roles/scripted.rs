use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendError};
use super::request::{RoleKind, RoleRequest};
use crate::error::{Error, Result};
use crate::io::read_jsonl_numbered;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptMatch {
    pub role_kind: RoleKind,
    /// Absent = matches every request of this role kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_digest: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: ScriptMatch,
    pub samples: Vec<String>,
}

/// Table-driven backend: exact `(role_kind, context_digest)` lookups with an
/// optional per-role fallback entry.
///
/// When a request asks for more samples than the entry holds, the entry is
/// cycled; fewer are truncated in script order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    id: String,
    exact: HashMap<(RoleKind, String), Vec<String>>,
    fallback: HashMap<RoleKind, Vec<String>>,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>) -> Self {
        ScriptedBackend { id: id.into(), ..Default::default() }
    }

    pub fn load(id: impl Into<String>, path: &Path) -> Result<Self> {
        let mut backend = ScriptedBackend::new(id);
        for (line, entry) in read_jsonl_numbered::<ScriptEntry>(path)? {
            backend.add(entry).map_err(|e| Error::Parse { path: path.to_owned(), line, reason: e.to_string() })?;
        }
        Ok(backend)
    }

    pub fn add(&mut self, entry: ScriptEntry) -> Result<()> {
        if entry.samples.is_empty() {
            return Err(Error::invalid("script entry", "no samples"));
        }
        let kind = entry.matcher.role_kind;
        let dup = match entry.matcher.context_digest {
            Some(d) => self.exact.insert((kind, d), entry.samples).is_some(),
            None => self.fallback.insert(kind, entry.samples).is_some(),
        };
        if dup {
            return Err(Error::invalid("script entry", format!("duplicate match for {kind}")));
        }
        Ok(())
    }

    /// Scripts the response for requests whose context equals `request`'s.
    pub fn respond_to(mut self, request: &RoleRequest, samples: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let samples = samples.into_iter().map(Into::into).collect();
        self.exact.insert((request.role_kind, request.context_digest()), samples);
        self
    }

    pub fn respond_any(mut self, kind: RoleKind, samples: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.fallback.insert(kind, samples.into_iter().map(Into::into).collect());
        self
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &RoleRequest) -> std::result::Result<Vec<String>, BackendError> {
        let digest = request.context_digest();
        let samples = self
            .exact
            .get(&(request.role_kind, digest.clone()))
            .or_else(|| self.fallback.get(&request.role_kind))
            .ok_or(BackendError::NoScript { role_kind: request.role_kind, digest })?;
        Ok(samples.iter().cycle().take(request.sample_count).cloned().collect())
    }
}
