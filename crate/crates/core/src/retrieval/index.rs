use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::TokenizerConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{reindex, Document};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: String,
    pub term_frequency: u32,
}

/// Okapi BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params<F> {
    pub k1: F,
    pub b: F,
}

impl<F: Real> Default for Bm25Params<F> {
    fn default() -> Self {
        Bm25Params { k1: F::from_f64_lossy(1.2), b: F::from_f64_lossy(0.75) }
    }
}

impl<F: Real> Bm25Params<F> {
    pub fn new(k1: F, b: F) -> Result<Self> {
        if k1.is_nan() || k1 <= F::zero() || k1.is_infinite() {
            return Err(Error::invalid("bm25 parameters", format!("k1 must be > 0, got {k1}")));
        }
        if !(b >= F::zero() && b <= F::one()) {
            return Err(Error::invalid("bm25 parameters", format!("b must be in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, positive for every df ≤ N.
    pub fn idf(doc_count: usize, doc_freq: usize) -> F {
        let n = F::from_usize_lossy(doc_count);
        let df = F::from_usize_lossy(doc_freq);
        let half = F::from_f64_lossy(0.5);
        (F::one() + (n - df + half) / (df + half)).ln()
    }

    /// Saturated, length-normalized term frequency.
    pub fn tf_weight(&self, tf: u32, doc_len: usize, avg_doc_len: F) -> F {
        let tf = F::from_f64_lossy(f64::from(tf));
        let len_ratio = if avg_doc_len > F::zero() { F::from_usize_lossy(doc_len) / avg_doc_len } else { F::one() };
        let norm = self.k1 * (F::one() - self.b + self.b * len_ratio);
        tf * (self.k1 + F::one()) / (tf + norm)
    }
}

/// Immutable inverted index over a passage corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    tokenizer: TokenizerConfig,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: BTreeMap<String, usize>,
    doc_count: usize,
    avg_doc_length: f64,
    doc_store: BTreeMap<String, Document>,
}

impl CorpusIndex {
    /// Builds the index. Input order does not affect the result.
    pub fn build<I>(corpus: I, tokenizer: TokenizerConfig) -> Result<Self>
    where
        I: IntoIterator<Item = Document>,
    {
        let mut doc_store = BTreeMap::new();
        let mut doc_lengths = BTreeMap::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();

        for doc in corpus {
            if doc_store.contains_key(doc.doc_id()) {
                return Err(Error::DuplicateDocId(doc.doc_id().to_owned()));
            }
            // title participates in matching
            let tokens = tokenizer.tokenize(&format!("{} {}", doc.title(), doc.text()));
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { doc_id: doc.doc_id().to_owned(), term_frequency: count });
            }
            doc_lengths.insert(doc.doc_id().to_owned(), tokens.len());
            doc_store.insert(doc.doc_id().to_owned(), doc.scored(0.0, 0)?);
        }

        if doc_store.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for list in postings.values_mut() {
            list.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        }
        let doc_count = doc_store.len();
        let avg_doc_length = doc_lengths.values().sum::<usize>() as f64 / doc_count as f64;
        Ok(CorpusIndex { tokenizer, postings, doc_lengths, doc_count, avg_doc_length, doc_store })
    }

    pub fn tokenizer(&self) -> TokenizerConfig {
        self.tokenizer
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.doc_lengths.get(doc_id).copied()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_store.get(doc_id)
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.doc_store.values()
    }

    /// BM25 score of every document sharing at least one query token. Each
    /// query token occurrence contributes once, so repeated terms weigh more.
    pub fn bm25_scores<F: Real>(&self, query_tokens: &[String], params: Bm25Params<F>) -> BTreeMap<&str, F> {
        let avg = F::from_f64_lossy(self.avg_doc_length);
        let mut scores: BTreeMap<&str, F> = BTreeMap::new();
        for term in query_tokens {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = Bm25Params::<F>::idf(self.doc_count, list.len());
            for p in list {
                let len = self.doc_lengths[&p.doc_id];
                let w = idf * params.tf_weight(p.term_frequency, len, avg);
                let entry = scores.entry(p.doc_id.as_str()).or_insert_with(F::zero);
                *entry = *entry + w;
            }
        }
        scores
    }

    /// Top-`n` documents by BM25, descending, ties on ascending doc_id.
    /// Zero-score documents are never returned.
    pub fn search(&self, query_text: &str, n: usize, params: Bm25Params<f64>) -> Result<Vec<Document>> {
        let tokens = self.tokenizer.tokenize(query_text);
        if tokens.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let mut scored: Vec<(&str, f64)> =
            self.bm25_scores(&tokens, params).into_iter().filter(|&(_, s)| s > 0.0).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(n);
        let docs = scored
            .into_iter()
            .map(|(id, s)| self.doc_store[id].scored(s, 0))
            .collect::<Result<Vec<_>>>()?;
        Ok(reindex(docs))
    }
}
