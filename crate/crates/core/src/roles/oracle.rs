//! Gold-aware backends. They stand in for perfect role models when checking
//! the search machinery itself.

use std::collections::HashMap;
use std::sync::Arc;

use super::backend::{Backend, BackendError};
use super::render::{format_ranking, render_passages, split_gold, split_rendered};
use super::request::{field, RoleKind, RoleRequest};
use crate::metrics::{contains_answer, exact_match_str};
use crate::types::GoldAnswers;

/// Answers every role as if it knew the gold answers: windows are sorted
/// answer-bearing passages first (stable), evaluators return 1 when the
/// judged text contains a gold answer and 0 otherwise.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    id: String,
    gold: HashMap<String, Vec<String>>,
}

impl OracleBackend {
    pub fn new<I>(gold_by_question: I) -> Self
    where
        I: IntoIterator<Item = (String, GoldAnswers)>,
    {
        OracleBackend {
            id: "oracle".into(),
            gold: gold_by_question.into_iter().map(|(q, g)| (q, g.answers().to_vec())).collect(),
        }
    }

    fn gold_for(&self, request: &RoleRequest) -> Vec<String> {
        if let Some(g) = request.field(field::GOLD) {
            return split_gold(g).into_iter().map(str::to_owned).collect();
        }
        request.field(field::QUESTION).and_then(|q| self.gold.get(q)).cloned().unwrap_or_default()
    }

    fn answer_from(gold: &[String], passages: &[&str]) -> String {
        match gold.first() {
            Some(first) if passages.iter().any(|p| contains_answer(p, gold)) => first.clone(),
            _ => "unknown".into(),
        }
    }

    fn respond(&self, request: &RoleRequest) -> String {
        let gold = self.gold_for(request);
        let flag = |hit: bool| if hit { "1" } else { "0" }.to_owned();
        match request.role_kind {
            RoleKind::Expand => {
                let q = request.field(field::QUESTION).unwrap_or_default();
                match (request.field(field::GOLD), gold.first()) {
                    (Some(_), Some(a)) => format!("Background on {q}: {a}."),
                    _ => format!("Background on {q}."),
                }
            }
            RoleKind::RankWindow => {
                let passages = split_rendered(request.field(field::DOCUMENTS).unwrap_or_default());
                let mut order: Vec<usize> = (0..passages.len()).collect();
                order.sort_by_key(|&i| !contains_answer(passages[i], &gold));
                format_ranking(&order)
            }
            RoleKind::Answer => {
                let passages = split_rendered(request.field(field::EVIDENCE).unwrap_or_default());
                Self::answer_from(&gold, &passages)
            }
            RoleKind::ScoreExpansion => flag(contains_answer(request.field(field::CANDIDATE).unwrap_or_default(), &gold)),
            RoleKind::ScoreReranking => {
                let passages = split_rendered(request.field(field::DOCUMENTS).unwrap_or_default());
                flag(passages.iter().any(|p| contains_answer(p, &gold)))
            }
            RoleKind::ScoreAnswer => {
                let mut passages = vec![request.field(field::EXPANSION).unwrap_or_default()];
                passages.extend(split_rendered(request.field(field::DOCUMENTS).unwrap_or_default()));
                let predicted = Self::answer_from(&gold, &passages);
                flag(gold.iter().any(|g| exact_match_str(&predicted, g)))
            }
            RoleKind::ProposePrompt => request.field(field::CURRENT_PROMPT).unwrap_or_default().to_owned(),
        }
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError> {
        Ok(vec![self.respond(request); request.sample_count])
    }
}

/// Answer evaluator that regenerates the answer with `reader` and scores
/// 1 on exact match with the gold answers, else 0.
pub struct EmOracleEvaluator {
    id: String,
    reader: Arc<dyn Backend>,
}

impl EmOracleEvaluator {
    pub fn new(reader: Arc<dyn Backend>) -> Self {
        EmOracleEvaluator { id: format!("em-oracle({})", reader.id()), reader }
    }
}

impl Backend for EmOracleEvaluator {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError> {
        if request.role_kind != RoleKind::ScoreAnswer {
            return Err(BackendError::Unsupported { backend: self.id.clone(), role_kind: request.role_kind });
        }
        let expansion = request.field(field::EXPANSION).unwrap_or_default();
        let mut evidence = vec![expansion];
        evidence.extend(split_rendered(request.field(field::DOCUMENTS).unwrap_or_default()));
        let regen = RoleRequest {
            role_kind: RoleKind::Answer,
            prompt: request.field(field::ANSWER_PROMPT).unwrap_or_default().to_owned(),
            context: vec![
                (field::QUESTION.into(), request.field(field::QUESTION).unwrap_or_default().to_owned()),
                (field::EVIDENCE.into(), render_passages(&evidence)),
            ],
            temperature: 0.0,
            sample_count: 1,
            seed: request.seed,
        };
        let answer = self.reader.complete(&regen)?.into_iter().next().unwrap_or_default();
        let gold = split_gold(request.field(field::GOLD).unwrap_or_default());
        let hit = gold.iter().any(|g| exact_match_str(answer.trim(), g));
        Ok(vec![if hit { "1" } else { "0" }.to_owned(); request.sample_count])
    }
}
