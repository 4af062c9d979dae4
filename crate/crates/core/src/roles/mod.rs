//! LLM roles behind one request/response abstraction.
//!
//! Generators (expansion, answer), the window reranker, the three
//! evaluators and the prompt updater are all [`RoleRequest`]s sent to a
//! [`Backend`]. [`RoleSet`] binds a backend to every role kind and turns raw
//! samples into domain values with the retry and fallback rules:
//!
//! * one retry on empty or unparseable output, then the documented fallback;
//! * malformed rankings leave the window in input order (flagged);
//! * unparseable or failed evaluator calls score 0 (flagged).

mod backend;
mod cache;
mod http;
mod mock;
mod oracle;
pub mod render;
mod request;
mod scripted;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

pub use backend::{Backend, BackendError, CallCounter, FnBackend};
pub use cache::{call_with_cache, ResponseCache};
pub use http::{chat_messages, ChatMessage, ChatRequest, HttpBackend, HttpConfig};
pub use mock::MockBackend;
pub use oracle::{EmOracleEvaluator, OracleBackend};
pub use request::{field, RoleKind, RoleRequest, RoleResponse};
pub use scripted::{ScriptEntry, ScriptMatch, ScriptedBackend};

use crate::error::{Error, Result};
use crate::types::{Document, Expansion, GoldAnswers, Question, Score};
use render::{parse_ranking, parse_score, render_documents, render_gold, render_passages, DEFAULT_DOC_TOKENS};

/// Salt folded into the seed of a retried call so cached or seeded
/// backends do not replay the failed output.
const RETRY_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Fixed (non-learnable) instructions for evaluators, the expansion
/// posterior and the prompt updaters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Instructions {
    pub score_expansion: String,
    pub score_reranking: String,
    pub score_answer: String,
    pub posterior_expansion: String,
    pub update_expand: String,
    pub update_rerank: String,
    pub update_answer: String,
}

impl Default for Instructions {
    fn default() -> Self {
        Instructions {
            score_expansion: "You judge background passages written for a question. Rate from 0 to 1 how relevant \
                              and logically consistent the candidate passage is for answering the question."
                .into(),
            score_reranking: "You judge ranked evidence lists. Rate from 0 to 1 how much the listed passages, in \
                              this order, help answer the question."
                .into(),
            score_answer: "You judge evidence for a reader model. Given the question, background, passages and the \
                           correct answer, rate from 0 to 1 how likely a reader following the answer prompt would \
                           produce the correct answer."
                .into(),
            posterior_expansion: "Make a minor edit to the prior background passage so that, together with the \
                                  documents, it better supports the correct answer. Stay close to the original \
                                  wording."
                .into(),
            update_expand: "You improve an instruction prompt used to write background passages for questions. \
                            Given the current prompt, the passage it produced and a better target passage, rewrite \
                            the prompt so its output moves toward the target."
                .into(),
            update_rerank: "You improve an instruction prompt used to rank passages by how likely they contain the \
                            answer. Given the current prompt, the ranking it produced and a better target ranking, \
                            rewrite the prompt so its output moves toward the target."
                .into(),
            update_answer: "You improve an instruction prompt used to answer questions from evidence. Given the \
                            current prompt, the answer it produced and the correct answer, rewrite the prompt so \
                            the produced answer moves toward the correct one."
                .into(),
        }
    }
}

#[derive(Clone)]
pub struct Binding {
    pub backend: Arc<dyn Backend>,
    pub temperature: f64,
}

impl std::fmt::Debug for Binding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Binding").field("backend", &self.backend.id()).field("temperature", &self.temperature).finish()
    }
}

/// Result of one evaluator call.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub score: Score<f64>,
    pub warning: Option<String>,
}

/// Result of one window ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOutcome {
    pub docs: Vec<Document>,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct Expansions {
    pub expansions: Vec<Expansion>,
    pub warnings: Vec<String>,
}

/// Backends bound to every role kind plus call policy.
#[derive(Debug, Clone)]
pub struct RoleSet {
    bindings: HashMap<RoleKind, Binding>,
    cache: Option<ResponseCache>,
    max_retries: u32,
    retry_backoff: Duration,
    doc_tokens: usize,
    instructions: Instructions,
}

fn default_temperature(kind: RoleKind) -> f64 {
    match kind {
        RoleKind::Expand | RoleKind::RankWindow | RoleKind::ProposePrompt => 0.7,
        _ => 0.0,
    }
}

impl RoleSet {
    /// Binds `backend` to every role kind.
    pub fn uniform(backend: Arc<dyn Backend>) -> Self {
        let bindings = RoleKind::ALL
            .into_iter()
            .map(|k| (k, Binding { backend: backend.clone(), temperature: default_temperature(k) }))
            .collect();
        RoleSet {
            bindings,
            cache: None,
            max_retries: 2,
            retry_backoff: Duration::from_millis(250),
            doc_tokens: DEFAULT_DOC_TOKENS,
            instructions: Instructions::default(),
        }
    }

    pub fn bind(mut self, kind: RoleKind, backend: Arc<dyn Backend>) -> Self {
        let temperature = self.bindings[&kind].temperature;
        self.bindings.insert(kind, Binding { backend, temperature });
        self
    }

    pub fn with_temperature(mut self, kind: RoleKind, temperature: f64) -> Self {
        if let Some(b) = self.bindings.get_mut(&kind) {
            b.temperature = temperature.max(0.0);
        }
        self
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Retries for transient transport failures.
    pub fn with_max_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.max_retries = retries;
        self.retry_backoff = backoff;
        self
    }

    pub fn with_doc_tokens(mut self, tokens: usize) -> Self {
        self.doc_tokens = tokens.max(1);
        self
    }

    pub fn with_instructions(mut self, instructions: Instructions) -> Self {
        self.instructions = instructions;
        self
    }

    pub fn binding(&self, kind: RoleKind) -> &Binding {
        &self.bindings[&kind]
    }

    pub fn instructions(&self) -> &Instructions {
        &self.instructions
    }

    pub fn doc_tokens(&self) -> usize {
        self.doc_tokens
    }

    pub fn render_docs(&self, docs: &[Document]) -> String {
        render_documents(docs, self.doc_tokens)
    }

    /// Sends `request` to the backend bound to its role kind, through the
    /// cache, retrying transient failures.
    pub fn call(&self, mut request: RoleRequest) -> std::result::Result<RoleResponse, BackendError> {
        let binding = &self.bindings[&request.role_kind];
        request.temperature = binding.temperature;
        let mut attempt = 0;
        loop {
            match call_with_cache(&request, binding.backend.as_ref(), self.cache.as_ref()) {
                Ok(mut resp) => {
                    resp.samples.truncate(request.sample_count);
                    return Ok(resp);
                }
                Err(e) if e.is_transient() && attempt < self.max_retries => {
                    attempt += 1;
                    tracing::warn!(role = %request.role_kind, attempt, error = %e, "retrying backend call");
                    std::thread::sleep(self.retry_backoff * attempt);
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn sample_expansions(&self, request: RoleRequest, m: usize, version: u64) -> Result<Expansions> {
        let request = request.with_samples(m);
        let first = self.call(request.clone()).map_err(|e| Error::stage("expansion", e.to_string()))?;
        let mut warnings = Vec::new();
        let mut texts: Vec<String> = first.samples.into_iter().filter(|s| !s.trim().is_empty()).collect();
        let missing = m.saturating_sub(texts.len());
        if missing > 0 {
            let retry = request.clone().with_samples(missing).with_seed(request.seed.wrapping_add(RETRY_SALT));
            let extra = self.call(retry).map_err(|e| Error::stage("expansion", e.to_string()))?;
            texts.extend(extra.samples.into_iter().filter(|s| !s.trim().is_empty()));
            if texts.len() < m {
                let msg = format!("dropped {} empty expansion(s) after retry", m - texts.len());
                tracing::warn!("{msg}");
                warnings.push(msg);
            }
        }
        texts.truncate(m);
        let expansions = texts.into_iter().map(|t| Expansion::new(t.trim(), version)).collect::<Result<_>>()?;
        Ok(Expansions { expansions, warnings })
    }

    /// Samples `m` expansions of `q` under prompt `theta_e`.
    pub fn generate_expansions(&self, q: &Question, theta_e: &str, m: usize, seed: u64, version: u64) -> Result<Expansions> {
        if m == 0 {
            return Err(Error::invalid("expansion count", "m must be >= 1"));
        }
        let req = RoleRequest::new(RoleKind::Expand, theta_e, [(field::QUESTION, q.text())])?.with_seed(seed);
        self.sample_expansions(req, m, version)
    }

    /// Samples `m` gold-conditioned edits of the prior expansion.
    pub fn posterior_expansions(
        &self,
        q: &Question,
        prior: &Expansion,
        docs: &[Document],
        gold: &GoldAnswers,
        m: usize,
        seed: u64,
    ) -> Result<Expansions> {
        let req = RoleRequest::new(
            RoleKind::Expand,
            self.instructions.posterior_expansion.clone(),
            [
                (field::QUESTION, q.text().to_owned()),
                (field::PRIOR_EXPANSION, prior.text().to_owned()),
                (field::DOCUMENTS, self.render_docs(docs)),
                (field::GOLD, render_gold(gold)),
            ],
        )?
        .with_seed(seed);
        self.sample_expansions(req, m.max(1), prior.source_prompt_version())
    }

    /// Reorders one window. Never fails: an unusable ranking (after one
    /// retry) or a backend error keeps the input order and sets `fallback`.
    pub fn rank_window(&self, q: &Question, e: &Expansion, window: &[Document], theta_d: &str, seed: u64) -> RankOutcome {
        let unchanged = RankOutcome { docs: window.to_vec(), fallback: true };
        let Ok(req) = RoleRequest::new(
            RoleKind::RankWindow,
            theta_d,
            [
                (field::QUESTION, q.text().to_owned()),
                (field::EXPANSION, e.text().to_owned()),
                (field::DOCUMENTS, self.render_docs(window)),
            ],
        ) else {
            return unchanged;
        };
        let req = req.with_seed(seed);
        for attempt in 0..2u64 {
            let req = req.clone().with_seed(seed.wrapping_add(attempt * RETRY_SALT));
            match self.call(req) {
                Ok(resp) => {
                    let parsed = resp.samples.first().and_then(|s| parse_ranking(s, window.len()));
                    if let Some(order) = parsed {
                        return RankOutcome { docs: order.into_iter().map(|i| window[i].clone()).collect(), fallback: false };
                    }
                }
                Err(err) => {
                    tracing::warn!(error = %err, "window ranking call failed; keeping input order");
                    return unchanged;
                }
            }
        }
        tracing::warn!(question = q.id(), "unparseable window ranking; keeping input order");
        unchanged
    }

    /// First sample, trimmed. Empty output is retried once, then an error.
    pub fn generate_answer<S: AsRef<str>>(&self, q: &Question, evidence: &[S], theta_a: &str, seed: u64) -> Result<String> {
        let req = RoleRequest::new(
            RoleKind::Answer,
            theta_a,
            [(field::QUESTION, q.text().to_owned()), (field::EVIDENCE, render_passages(evidence))],
        )?;
        for attempt in 0..2u64 {
            let resp = self
                .call(req.clone().with_seed(seed.wrapping_add(attempt * RETRY_SALT)))
                .map_err(|e| Error::stage("answer", e.to_string()))?;
            if let Some(answer) = resp.samples.first().map(|s| s.trim()).filter(|s| !s.is_empty()) {
                return Ok(answer.to_owned());
            }
        }
        Err(Error::stage("answer", "empty answer after retry"))
    }

    fn score_call(&self, req: RoleRequest) -> ScoreOutcome {
        let seed = req.seed;
        for attempt in 0..2u64 {
            match self.call(req.clone().with_seed(seed.wrapping_add(attempt * RETRY_SALT))) {
                Ok(resp) => {
                    if let Some(v) = resp.samples.first().and_then(|s| parse_score(s)) {
                        return ScoreOutcome { score: Score::new(v), warning: None };
                    }
                }
                Err(e) => {
                    let msg = format!("{} call failed: {e}", req.role_kind);
                    tracing::warn!("{msg}");
                    return ScoreOutcome { score: Score::zero(), warning: Some(msg) };
                }
            }
        }
        let msg = format!("unparseable {} output after retry; scored 0", req.role_kind);
        tracing::warn!("{msg}");
        ScoreOutcome { score: Score::zero(), warning: Some(msg) }
    }

    fn score_request<const N: usize>(&self, kind: RoleKind, prompt: &str, fields: [(&str, String); N], extra: Vec<(&str, String)>, seed: u64) -> ScoreOutcome {
        let context = fields.into_iter().chain(extra);
        match RoleRequest::new(kind, prompt, context) {
            Ok(req) => self.score_call(req.with_seed(seed)),
            Err(e) => ScoreOutcome { score: Score::zero(), warning: Some(e.to_string()) },
        }
    }

    /// Scores an expansion candidate. `generator_prompt` names the expansion
    /// prompt the candidate is judged against.
    pub fn score_expansion(
        &self,
        candidate: &Expansion,
        q: &Question,
        generator_prompt: Option<&str>,
        gold: Option<&GoldAnswers>,
        seed: u64,
    ) -> ScoreOutcome {
        let mut extra = Vec::new();
        if let Some(p) = generator_prompt {
            extra.push((field::GENERATOR_PROMPT, p.to_owned()));
        }
        if let Some(g) = gold {
            extra.push((field::GOLD, render_gold(g)));
        }
        self.score_request(
            RoleKind::ScoreExpansion,
            &self.instructions.score_expansion,
            [(field::QUESTION, q.text().to_owned()), (field::CANDIDATE, candidate.text().to_owned())],
            extra,
            seed,
        )
    }

    /// Scores a ranked document list.
    pub fn score_reranking(
        &self,
        docs: &[Document],
        q: &Question,
        e: &Expansion,
        reranker_prompt: Option<&str>,
        gold: Option<&GoldAnswers>,
        seed: u64,
    ) -> ScoreOutcome {
        let mut extra = Vec::new();
        if let Some(p) = reranker_prompt {
            extra.push((field::RERANKER_PROMPT, p.to_owned()));
        }
        if let Some(g) = gold {
            extra.push((field::GOLD, render_gold(g)));
        }
        self.score_request(
            RoleKind::ScoreReranking,
            &self.instructions.score_reranking,
            [
                (field::QUESTION, q.text().to_owned()),
                (field::EXPANSION, e.text().to_owned()),
                (field::DOCUMENTS, self.render_docs(docs)),
            ],
            extra,
            seed,
        )
    }

    /// Scores how well the generation inputs (and optional answer prompt)
    /// lead to the gold answer.
    pub fn score_answer(
        &self,
        gold: &GoldAnswers,
        q: &Question,
        e: &Expansion,
        docs: &[Document],
        answer_prompt: Option<&str>,
        seed: u64,
    ) -> ScoreOutcome {
        let extra = answer_prompt.map(|p| vec![(field::ANSWER_PROMPT, p.to_owned())]).unwrap_or_default();
        self.score_request(
            RoleKind::ScoreAnswer,
            &self.instructions.score_answer,
            [
                (field::QUESTION, q.text().to_owned()),
                (field::EXPANSION, e.text().to_owned()),
                (field::DOCUMENTS, self.render_docs(docs)),
                (field::GOLD, render_gold(gold)),
            ],
            extra,
            seed,
        )
    }

    /// Meta-prompt call returning up to `k` rewritten prompts (empty
    /// samples dropped).
    pub fn propose_prompts(
        &self,
        instruction: &str,
        context: Vec<(&str, String)>,
        k: usize,
        seed: u64,
    ) -> std::result::Result<Vec<String>, BackendError> {
        let req = RoleRequest::new(RoleKind::ProposePrompt, instruction, context)
            .map_err(|e| BackendError::Config(e.to_string()))?
            .with_samples(k)
            .with_seed(seed);
        let resp = self.call(req)?;
        Ok(resp.samples.into_iter().map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect())
    }
}
