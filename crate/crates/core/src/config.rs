//! Run configuration: one JSON or TOML file covering retrieval, pipeline,
//! training, backends and role bindings.
//!
//! Relative paths inside the file resolve against the file's directory.
//! Credentials never live here; HTTP backends name an environment variable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::load_dataset;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::prompt_opt::TrainConfig;
use crate::retrieval::RetrievalConfig;
use crate::roles::render::DEFAULT_DOC_TOKENS;
use crate::roles::{
    Backend, HttpBackend, HttpConfig, Instructions, MockBackend, OracleBackend, ResponseCache, RoleKind, RoleSet,
    ScriptedBackend,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Mock {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        default_answer: Option<String>,
    },
    Scripted {
        path: PathBuf,
    },
    Http {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    /// Answers from the gold answers of a dataset file.
    Oracle {
        dataset: PathBuf,
    },
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleBinding {
    pub backend: String,
    #[serde(default)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoleBindings {
    pub default_backend: Option<String>,
    /// Keyed by role kind name, e.g. `answer` or `score_reranking`.
    pub bindings: BTreeMap<String, RoleBinding>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub doc_tokens: usize,
    pub retrieval: RetrievalConfig,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub backends: BTreeMap<String, BackendSpec>,
    pub roles: RoleBindings,
    pub instructions: Instructions,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut backends = BTreeMap::new();
        backends.insert("mock".to_owned(), BackendSpec::Mock { seed: 0, default_answer: None });
        RunConfig {
            seed: 0,
            workers: 4,
            cache_dir: None,
            output_dir: None,
            max_retries: 2,
            retry_backoff_ms: 500,
            doc_tokens: DEFAULT_DOC_TOKENS,
            retrieval: RetrievalConfig::default(),
            pipeline: PipelineConfig::default(),
            train: TrainConfig::default(),
            backends,
            roles: RoleBindings { default_backend: Some("mock".to_owned()), bindings: BTreeMap::new() },
            instructions: Instructions::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Parses by extension (`.toml`, otherwise JSON) and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |reason: String| Error::Parse { path: path.to_owned(), line: 0, reason };
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Checks every section without touching any backend.
    pub fn validate(&self) -> Result<()> {
        self.retrieval.validate()?;
        self.pipeline.validate()?;
        self.train.validate()?;
        if self.workers == 0 {
            return Err(Error::invalid("run config", "workers must be >= 1"));
        }
        if self.doc_tokens == 0 {
            return Err(Error::invalid("run config", "doc_tokens must be >= 1"));
        }
        for name in self.roles.bindings.keys() {
            name.parse::<RoleKind>().map_err(|_| Error::invalid("role bindings", format!("unknown role kind {name:?}")))?;
        }
        for kind in RoleKind::ALL {
            let binding = self.binding_for(kind)?;
            if let Some(t) = binding.1 {
                if !(0.0..=2.0).contains(&t) {
                    return Err(Error::invalid("role bindings", format!("temperature {t} for {kind}")));
                }
            }
        }
        for (name, spec) in &self.backends {
            if let BackendSpec::Http { endpoint, model, .. } = spec {
                if endpoint.trim().is_empty() || model.trim().is_empty() {
                    return Err(Error::invalid("backends", format!("{name:?} needs an endpoint and a model")));
                }
            }
        }
        Ok(())
    }

    fn binding_for(&self, kind: RoleKind) -> Result<(&str, Option<f64>)> {
        let (backend, temperature) = match self.roles.bindings.get(kind.as_str()) {
            Some(b) => (b.backend.as_str(), b.temperature),
            None => match &self.roles.default_backend {
                Some(d) => (d.as_str(), None),
                None => return Err(Error::invalid("role bindings", format!("{kind} has no backend"))),
            },
        };
        if !self.backends.contains_key(backend) {
            return Err(Error::invalid("role bindings", format!("{kind} bound to unknown backend {backend:?}")));
        }
        Ok((backend, temperature))
    }

    /// Pipeline settings with the retrieval depth and seed filled in.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig { n_retrieve: self.retrieval.n, random_seed: self.seed, ..self.pipeline.clone() }
    }

    pub fn build_backend(&self, name: &str, spec: &BackendSpec) -> Result<Arc<dyn Backend>> {
        Ok(match spec {
            BackendSpec::Mock { seed, default_answer } => {
                let mut m = MockBackend::new(*seed).with_id(name);
                if let Some(a) = default_answer {
                    m = m.with_default_answer(a.clone());
                }
                Arc::new(m)
            }
            BackendSpec::Scripted { path } => Arc::new(ScriptedBackend::load(name, &self.resolve(path))?),
            BackendSpec::Http { endpoint, model, api_key_env, timeout_secs } => {
                let cfg = HttpConfig {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    api_key_env: api_key_env.clone(),
                    timeout_secs: *timeout_secs,
                };
                Arc::new(HttpBackend::new(name, cfg)?)
            }
            BackendSpec::Oracle { dataset } => {
                let examples = load_dataset(&self.resolve(dataset))?;
                Arc::new(OracleBackend::new(examples.into_iter().map(|e| (e.question.text().to_owned(), e.gold))))
            }
        })
    }

    /// Instantiates the backends every role kind is bound to.
    pub fn build_roles(&self) -> Result<RoleSet> {
        self.validate()?;
        let mut built: BTreeMap<&str, Arc<dyn Backend>> = BTreeMap::new();
        let mut roles: Option<RoleSet> = None;
        for kind in RoleKind::ALL {
            let (name, temperature) = self.binding_for(kind)?;
            if !built.contains_key(name) {
                built.insert(name, self.build_backend(name, &self.backends[name])?);
            }
            let backend = built[name].clone();
            let mut set = match roles.take() {
                Some(set) => set.bind(kind, backend),
                None => RoleSet::uniform(backend),
            };
            if let Some(t) = temperature {
                set = set.with_temperature(kind, t);
            }
            roles = Some(set);
        }
        let mut roles = roles
            .expect("RoleKind::ALL is non-empty")
            .with_max_retries(self.max_retries, Duration::from_millis(self.retry_backoff_ms))
            .with_doc_tokens(self.doc_tokens)
            .with_instructions(self.instructions.clone());
        if let Some(dir) = &self.cache_dir {
            roles = roles.with_cache(ResponseCache::new(self.resolve(dir)));
        }
        Ok(roles)
    }
}
