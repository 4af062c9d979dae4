//! Forward inference: expansion, then document selection, then answer.
//!
//! Each latent step samples candidates and keeps the one the evaluator
//! scores highest (ties to the lowest index); every candidate and score
//! lands in the [`Trace`].

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rerank::{rerank_with_candidates, CandidateRerank, WindowConfig};
use crate::retrieval::Retriever;
use crate::roles::RoleSet;
use crate::scalar::argmax_first;
use crate::types::{
    reindex, Document, EvidenceItem, Expansion, PromptSet, Question, ScoredExpansion, Stage, StageTiming, Trace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionLocation {
    #[default]
    First,
    Last,
    Random,
}

/// How the top-k evidence documents are picked from the retrieved pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankStrategy {
    /// Listwise sliding-window reranking.
    #[default]
    Sliding,
    /// Keep retrieval order.
    RetrievalScore,
    /// Seeded shuffle.
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub m_expansions: usize,
    /// Taken from the retrieval section when loaded from a run config.
    #[serde(skip)]
    pub n_retrieve: usize,
    pub window: WindowConfig,
    pub rerank_candidates: usize,
    pub insertion_location: InsertionLocation,
    pub rerank_strategy: RerankStrategy,
    #[serde(skip)]
    pub random_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            m_expansions: 10,
            n_retrieve: 100,
            window: WindowConfig::default(),
            rerank_candidates: 1,
            insertion_location: InsertionLocation::First,
            rerank_strategy: RerankStrategy::Sliding,
            random_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m_expansions", self.m_expansions),
            ("n_retrieve", self.n_retrieve),
            ("rerank_candidates", self.rerank_candidates),
        ] {
            if v == 0 {
                return Err(Error::invalid("pipeline config", format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// FNV-1a over the base seed and a key; stable across platforms.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in base.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Inserts the expansion into the document list as an extra passage.
pub fn assemble_evidence(e: &Expansion, docs: &[Document], location: InsertionLocation, seed: u64) -> Vec<EvidenceItem> {
    let mut items: Vec<EvidenceItem> = docs
        .iter()
        .map(|d| EvidenceItem::Document { doc_id: d.doc_id().to_owned(), text: passage_text(d) })
        .collect();
    let at = match location {
        InsertionLocation::First => 0,
        InsertionLocation::Last => items.len(),
        InsertionLocation::Random => ChaCha8Rng::seed_from_u64(seed).random_range(0..=items.len()),
    };
    items.insert(at, EvidenceItem::Expansion { text: e.text().to_owned() });
    items
}

fn passage_text(d: &Document) -> String {
    if d.title().trim().is_empty() {
        d.text().to_owned()
    } else {
        format!("{}. {}", d.title().trim(), d.text())
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionChoice {
    pub best_index: usize,
    pub candidates: Vec<ScoredExpansion>,
    pub warnings: Vec<String>,
}

impl ExpansionChoice {
    pub fn best(&self) -> &Expansion {
        &self.candidates[self.best_index].expansion
    }
}

#[derive(Debug, Clone)]
pub struct DocumentSelection {
    pub retrieved: Vec<Document>,
    pub docs: Vec<Document>,
    pub rerank: Option<CandidateRerank>,
    pub warnings: Vec<String>,
}

/// The three stages wired to a role set and a retriever.
pub struct Pipeline<'a> {
    pub roles: &'a RoleSet,
    pub retriever: &'a dyn Retriever,
    pub config: &'a PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(roles: &'a RoleSet, retriever: &'a dyn Retriever, config: &'a PipelineConfig) -> Self {
        Pipeline { roles, retriever, config }
    }

    fn seed_for(&self, q: &Question, stage: &str) -> u64 {
        derive_seed(self.config.random_seed, &format!("{}/{stage}", q.id()))
    }

    /// Samples `m` expansions, scores each, keeps the argmax.
    pub fn expand_query(&self, q: &Question, prompts: &PromptSet) -> Result<ExpansionChoice> {
        let seed = self.seed_for(q, "expand");
        let sampled =
            self.roles.generate_expansions(q, prompts.theta_e(), self.config.m_expansions, seed, prompts.version())?;
        let mut warnings = sampled.warnings;
        if sampled.expansions.is_empty() {
            return Err(Error::stage("expansion", "every expansion candidate was empty"));
        }
        let candidates: Vec<ScoredExpansion> = sampled
            .expansions
            .into_iter()
            .enumerate()
            .map(|(j, expansion)| {
                let scored = self.roles.score_expansion(&expansion, q, None, None, seed.wrapping_add(j as u64));
                warnings.extend(scored.warning);
                ScoredExpansion { expansion, score: scored.score }
            })
            .collect();
        let scores: Vec<f64> = candidates.iter().map(|c| c.score.value()).collect();
        let best_index = argmax_first(&scores).unwrap_or(0);
        Ok(ExpansionChoice { best_index, candidates, warnings })
    }

    /// Question and expansion joined by a space.
    pub fn retrieval_query(q: &Question, e: &Expansion) -> String {
        format!("{} {}", q.text(), e.text())
    }

    pub fn retrieve(&self, q: &Question, e: &Expansion) -> Result<Vec<Document>> {
        self.retriever
            .retrieve(q, &Self::retrieval_query(q, e), self.config.n_retrieve)
            .map_err(|err| Error::stage("retrieval", err.to_string()))
    }

    /// Coarse retrieval followed by the configured top-k selection.
    pub fn select_documents(&self, q: &Question, e: &Expansion, prompts: &PromptSet) -> Result<DocumentSelection> {
        let retrieved = self.retrieve(q, e)?;
        self.rerank_retrieved(q, e, prompts, retrieved)
    }

    pub(crate) fn rerank_retrieved(
        &self,
        q: &Question,
        e: &Expansion,
        prompts: &PromptSet,
        retrieved: Vec<Document>,
    ) -> Result<DocumentSelection> {
        let mut warnings = Vec::new();
        if retrieved.is_empty() {
            let msg = format!("no documents retrieved for {}; answering closed-book", q.id());
            tracing::warn!("{msg}");
            warnings.push(msg);
            return Ok(DocumentSelection { retrieved, docs: Vec::new(), rerank: None, warnings });
        }
        let k = self.config.window.k().min(retrieved.len());
        let seed = self.seed_for(q, "rerank");
        match self.config.rerank_strategy {
            RerankStrategy::Sliding => {
                let roles = self.roles;
                let mut j = 0u64;
                let evaluator = |docs: &[Document]| {
                    j += 1;
                    roles.score_reranking(docs, q, e, None, None, seed.wrapping_add(j))
                };
                let rerank = rerank_with_candidates(
                    &retrieved,
                    q,
                    e,
                    prompts.theta_d(),
                    self.config.window,
                    self.roles,
                    evaluator,
                    self.config.rerank_candidates,
                    seed,
                )
                .map_err(|err| Error::stage("rerank", err.to_string()))?;
                warnings.extend(rerank.warnings.iter().cloned());
                let docs = rerank.best().to_vec();
                Ok(DocumentSelection { retrieved, docs, rerank: Some(rerank), warnings })
            }
            RerankStrategy::RetrievalScore => {
                let docs = reindex(retrieved[..k].iter().cloned());
                Ok(DocumentSelection { retrieved, docs, rerank: None, warnings })
            }
            RerankStrategy::Random => {
                let mut shuffled = retrieved.clone();
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let docs = reindex(shuffled.into_iter().take(k));
                Ok(DocumentSelection { retrieved, docs, rerank: None, warnings })
            }
        }
    }

    /// Runs every stage in order. Stage errors end the run early; the trace
    /// keeps what was completed and records the error.
    pub fn run(&self, q: &Question, prompts: &PromptSet) -> Trace {
        let mut trace = Trace::empty(q.id(), prompts.version());
        if let Err(err) = self.run_into(q, prompts, &mut trace) {
            tracing::warn!(question = q.id(), error = %err, "pipeline run aborted");
            trace.error = Some(err.to_string());
        }
        trace
    }

    fn run_into(&self, q: &Question, prompts: &PromptSet, trace: &mut Trace) -> Result<()> {
        let clock = Instant::now();
        let timed = |stage: Stage, started: Instant, trace: &mut Trace| {
            trace.timing.push(StageTiming {
                stage,
                start_ms: started.duration_since(clock).as_secs_f64() * 1e3,
                duration_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        };

        let t = Instant::now();
        let choice = self.expand_query(q, prompts)?;
        trace.warnings.extend(choice.warnings.iter().cloned());
        trace.expansion_candidates = choice.candidates.clone();
        trace.chosen_expansion_index = Some(choice.best_index);
        trace.chosen_expansion = Some(choice.best().clone());
        timed(Stage::Expansion, t, trace);
        let e = choice.best();

        let t = Instant::now();
        let retrieved = self.retrieve(q, e)?;
        trace.retrieved = retrieved.clone();
        timed(Stage::Retrieval, t, trace);

        let t = Instant::now();
        let selection = self.rerank_retrieved(q, e, prompts, retrieved)?;
        trace.warnings.extend(selection.warnings);
        if let Some(r) = &selection.rerank {
            trace.rerank_candidates = r.candidates.clone();
            trace.chosen_rerank_index = Some(r.best_index);
            trace.window_calls = r.window_calls;
            trace.window_fallbacks = r.fallbacks;
        }
        trace.reranked = selection.docs;
        timed(Stage::Rerank, t, trace);

        let t = Instant::now();
        let evidence =
            assemble_evidence(e, &trace.reranked, self.config.insertion_location, self.seed_for(q, "evidence"));
        let texts: Vec<&str> = evidence.iter().map(EvidenceItem::text).collect();
        trace.answer = self.roles.generate_answer(q, &texts, prompts.theta_a(), self.seed_for(q, "answer"))?;
        trace.evidence = evidence;
        timed(Stage::Answer, t, trace);
        Ok(())
    }
}
