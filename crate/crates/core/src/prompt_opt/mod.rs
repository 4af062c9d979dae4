//! Prompt optimization from question/answer pairs.
//!
//! Each training step runs the current prompts forward, samples
//! gold-conditioned posterior documents and expansions near the prior,
//! then proposes rewritten prompts and keeps the one maximizing a weighted
//! log-score objective over the posterior samples.

mod step;
mod store;

pub use step::{PriorOutputs, Trainer};
pub use store::{HistoryEntry, PromptStore, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{argmax_first, Real};
use crate::types::{Document, Expansion, Score};

pub const STEP_REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_doc_posteriors: usize,
    pub m_exp_posteriors: usize,
    pub k_prompt_candidates: usize,
    pub epsilon_log_floor: f64,
    pub include_incumbent: bool,
    pub max_examples: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_doc_posteriors: 2,
            m_exp_posteriors: 2,
            k_prompt_candidates: 2,
            epsilon_log_floor: 1e-6,
            include_incumbent: true,
            max_examples: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_doc_posteriors", self.n_doc_posteriors),
            ("m_exp_posteriors", self.m_exp_posteriors),
            ("k_prompt_candidates", self.k_prompt_candidates),
        ] {
            if v == 0 {
                return Err(Error::invalid("train config", format!("{name} must be >= 1")));
            }
        }
        if self.max_examples == Some(0) {
            return Err(Error::invalid("train config", "max_examples must be >= 1 when set"));
        }
        if !(self.epsilon_log_floor > 0.0 && self.epsilon_log_floor < 1.0) {
            return Err(Error::invalid("train config", "epsilon_log_floor must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Prior top-k with its last document swapped for a lower-ranked one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDocCandidate {
    pub docs: Vec<Document>,
    /// Position in the full reranked order of the swapped-in document;
    /// `None` when the prior list itself is the only candidate.
    pub swapped_in_rank: Option<usize>,
    pub s_d: Score<f64>,
    pub s_a: Score<f64>,
    pub v_d: f64,
}

impl PosteriorDocCandidate {
    pub fn new(docs: Vec<Document>, swapped_in_rank: Option<usize>, s_d: Score<f64>, s_a: Score<f64>) -> Self {
        PosteriorDocCandidate { docs, swapped_in_rank, s_d, s_a, v_d: s_d.value() * s_a.value() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorExpansionCandidate {
    pub expansion: Expansion,
    pub s_e: Score<f64>,
    pub s_d: Score<f64>,
    pub s_a: Score<f64>,
    pub v_e: f64,
}

impl PosteriorExpansionCandidate {
    pub fn new(expansion: Expansion, s_e: Score<f64>, s_d: Score<f64>, s_a: Score<f64>) -> Self {
        PosteriorExpansionCandidate { expansion, s_e, s_d, s_a, v_e: s_e.value() * s_d.value() * s_a.value() }
    }
}

/// The learnable prompt a selection applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Answer,
    Rerank,
    Expand,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Answer => "answer",
            PromptKind::Rerank => "rerank",
            PromptKind::Expand => "expand",
        }
    }
}

/// Weighted posterior samples shared by every candidate prompt of a step.
#[derive(Debug, Clone, Default)]
pub struct PosteriorGrid {
    pub docs: Vec<PosteriorDocCandidate>,
    pub expansions: Vec<PosteriorExpansionCandidate>,
}

impl PosteriorGrid {
    /// Cells scored for `kind`: `(doc index, expansion index)` pairs in
    /// doc-major order, or expansion indices alone for [`PromptKind::Expand`].
    pub fn cells(&self, kind: PromptKind) -> Vec<(Option<usize>, usize)> {
        match kind {
            PromptKind::Expand => (0..self.expansions.len()).map(|j| (None, j)).collect(),
            PromptKind::Answer | PromptKind::Rerank => (0..self.docs.len())
                .flat_map(|i| (0..self.expansions.len()).map(move |j| (Some(i), j)))
                .collect(),
        }
    }

    pub fn weights(&self, kind: PromptKind) -> Vec<f64> {
        self.cells(kind)
            .into_iter()
            .map(|(i, j)| {
                let v_e = self.expansions[j].v_e;
                i.map_or(v_e, |i| v_e * self.docs[i].v_d)
            })
            .collect()
    }
}

/// `Σ w · ln(max(s, eps))`.
pub fn weighted_log_objective<F: Real>(weights: &[F], scores: &[F], eps: F) -> F {
    weights.iter().zip(scores).fold(F::zero(), |acc, (&w, &s)| acc + w * s.max(eps).ln())
}

/// Every candidate prompt of one kind with its cell scores and objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSelection {
    pub kind: PromptKind,
    pub candidates: Vec<String>,
    pub cell_weights: Vec<f64>,
    /// `cell_scores[k][c]`: score of cell `c` under candidate `k`.
    pub cell_scores: Vec<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub best_index: usize,
    pub incumbent_index: Option<usize>,
    pub warnings: Vec<String>,
}

impl PromptSelection {
    pub fn selected(&self) -> &str {
        &self.candidates[self.best_index]
    }

    /// Builds the selection from precomputed cell scores.
    pub fn from_scores(
        kind: PromptKind,
        candidates: Vec<String>,
        cell_weights: Vec<f64>,
        cell_scores: Vec<Vec<f64>>,
        eps: f64,
        incumbent_index: Option<usize>,
    ) -> Self {
        let objectives: Vec<f64> =
            cell_scores.iter().map(|s| weighted_log_objective(&cell_weights, s, eps)).collect();
        let best_index = argmax_first(&objectives).unwrap_or(0);
        PromptSelection { kind, candidates, cell_weights, cell_scores, objectives, best_index, incumbent_index, warnings: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorReport {
    pub expansion: String,
    pub doc_ids: Vec<String>,
    pub answer: String,
}

/// Everything one training step computed; one JSON line in the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub schema_version: u32,
    pub step: usize,
    pub question_id: String,
    pub version_before: u64,
    pub version_after: u64,
    pub skipped: Option<String>,
    pub prior: Option<PriorReport>,
    pub doc_posteriors: Vec<PosteriorDocCandidate>,
    pub best_doc: Option<usize>,
    pub expansion_posteriors: Vec<PosteriorExpansionCandidate>,
    pub best_expansion: Option<usize>,
    /// Answer, rerank and expand selections, in that order.
    pub selections: Vec<PromptSelection>,
    pub warnings: Vec<String>,
}

impl StepReport {
    pub(crate) fn new(step: usize, question_id: &str, version_before: u64) -> Self {
        StepReport {
            schema_version: STEP_REPORT_SCHEMA,
            step,
            question_id: question_id.to_owned(),
            version_before,
            version_after: version_before,
            skipped: None,
            prior: None,
            doc_posteriors: Vec::new(),
            best_doc: None,
            expansion_posteriors: Vec::new(),
            best_expansion: None,
            selections: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn selection(&self, kind: PromptKind) -> Option<&PromptSelection> {
        self.selections.iter().find(|s| s.kind == kind)
    }

    /// Re-derives every recorded selection from the recorded arrays.
    pub fn is_consistent(&self) -> bool {
        let argmax_ok = |values: &[f64], chosen: Option<usize>| argmax_first(values) == chosen;
        let v_d: Vec<f64> = self.doc_posteriors.iter().map(|c| c.v_d).collect();
        let v_e: Vec<f64> = self.expansion_posteriors.iter().map(|c| c.v_e).collect();
        let products = self.doc_posteriors.iter().all(|c| (c.v_d - c.s_d.value() * c.s_a.value()).abs() <= 1e-12)
            && self
                .expansion_posteriors
                .iter()
                .all(|c| (c.v_e - c.s_e.value() * c.s_d.value() * c.s_a.value()).abs() <= 1e-12);
        products
            && argmax_ok(&v_d, self.best_doc)
            && argmax_ok(&v_e, self.best_expansion)
            && self.selections.iter().all(|s| argmax_ok(&s.objectives, Some(s.best_index)))
    }
}
