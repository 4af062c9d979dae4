//! Coarse top-n retrieval over a passage corpus.

mod external;
mod index;
mod tokenize;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use external::ExternalRanking;
pub use index::{Bm25Params, CorpusIndex, Posting};
pub use tokenize::{is_stopword, tokenize, TokenizerConfig};

use crate::error::{Error, Result};
use crate::io::read_jsonl_numbered;
use crate::types::{Document, Question};

/// Anything that can produce an ordered candidate list for a question.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, question: &Question, query_text: &str, n: usize) -> Result<Vec<Document>>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub n: usize,
    pub k1: f64,
    pub b: f64,
    pub external_scores_path: Option<PathBuf>,
    #[serde(flatten)]
    pub tokenizer: TokenizerConfig,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { n: 100, k1: 1.2, b: 0.75, external_scores_path: None, tokenizer: TokenizerConfig::default() }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("retrieval config", "n must be >= 1"));
        }
        Bm25Params::new(self.k1, self.b)?;
        Ok(())
    }

    pub fn bm25(&self) -> Result<Bm25Params<f64>> {
        Bm25Params::new(self.k1, self.b)
    }
}

/// BM25 over a built index.
#[derive(Debug, Clone)]
pub struct Bm25Retriever<'a> {
    index: &'a CorpusIndex,
    params: Bm25Params<f64>,
}

impl<'a> Bm25Retriever<'a> {
    pub fn new(index: &'a CorpusIndex, params: Bm25Params<f64>) -> Self {
        Bm25Retriever { index, params }
    }
}

impl Retriever for Bm25Retriever<'_> {
    fn retrieve(&self, _question: &Question, query_text: &str, n: usize) -> Result<Vec<Document>> {
        self.index.search(query_text, n, self.params)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CorpusRecord {
    id: String,
    #[serde(default)]
    title: String,
    text: String,
}

/// Reads a JSON-lines corpus of `{id, title, text}` records.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let records: Vec<(usize, CorpusRecord)> = read_jsonl_numbered(path)?;
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    records
        .into_iter()
        .map(|(line, r)| {
            Document::new(r.id, r.title, r.text).map_err(|e| Error::Parse { path: path.to_owned(), line, reason: e.to_string() })
        })
        .collect()
}
