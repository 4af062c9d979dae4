use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use super::request::{RoleKind, RoleRequest};

#[derive(Debug, Clone, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("no scripted response for {role_kind} (digest {digest})")]
    NoScript { role_kind: RoleKind, digest: String },
    #[error("backend {backend} does not serve {role_kind}")]
    Unsupported { backend: String, role_kind: RoleKind },
    #[error("{0}")]
    Config(String),
}

impl BackendError {
    /// Worth retrying with the same request.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A text-completion provider serving one or more role kinds.
///
/// Implementations must be safe to call concurrently.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    /// Returns up to `request.sample_count` samples.
    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError> {
        (**self).complete(request)
    }
}

type CompleteFn = dyn Fn(&RoleRequest) -> Result<Vec<String>, BackendError> + Send + Sync;

/// Backend driven by a closure.
#[derive(Clone)]
pub struct FnBackend {
    id: String,
    f: Arc<CompleteFn>,
}

impl FnBackend {
    pub fn new<F>(id: impl Into<String>, f: F) -> Self
    where
        F: Fn(&RoleRequest) -> Result<Vec<String>, BackendError> + Send + Sync + 'static,
    {
        FnBackend { id: id.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for FnBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnBackend").field("id", &self.id).finish_non_exhaustive()
    }
}

impl Backend for FnBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError> {
        (self.f)(request)
    }
}

/// Counts calls per role kind before delegating.
pub struct CallCounter<B> {
    inner: B,
    counts: Mutex<HashMap<RoleKind, usize>>,
}

impl<B: Backend> CallCounter<B> {
    pub fn new(inner: B) -> Self {
        CallCounter { inner, counts: Mutex::new(HashMap::new()) }
    }

    pub fn count(&self, kind: RoleKind) -> usize {
        self.counts.lock().expect("counter lock").get(&kind).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.lock().expect("counter lock").values().sum()
    }

    pub fn reset(&self) {
        self.counts.lock().expect("counter lock").clear();
    }
}

impl<B: Backend> Backend for CallCounter<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError> {
        *self.counts.lock().expect("counter lock").entry(request.role_kind).or_default() += 1;
        self.inner.complete(request)
    }
}
