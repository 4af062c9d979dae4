use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Expand,
    RankWindow,
    Answer,
    ScoreExpansion,
    ScoreReranking,
    ScoreAnswer,
    /// Meta-prompt call that rewrites one of the learnable prompts.
    ProposePrompt,
}

impl RoleKind {
    pub const ALL: [RoleKind; 7] = [
        RoleKind::Expand,
        RoleKind::RankWindow,
        RoleKind::Answer,
        RoleKind::ScoreExpansion,
        RoleKind::ScoreReranking,
        RoleKind::ScoreAnswer,
        RoleKind::ProposePrompt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleKind::Expand => "expand",
            RoleKind::RankWindow => "rank_window",
            RoleKind::Answer => "answer",
            RoleKind::ScoreExpansion => "score_expansion",
            RoleKind::ScoreReranking => "score_reranking",
            RoleKind::ScoreAnswer => "score_answer",
            RoleKind::ProposePrompt => "propose_prompt",
        }
    }

    pub fn is_evaluator(self) -> bool {
        matches!(self, RoleKind::ScoreExpansion | RoleKind::ScoreReranking | RoleKind::ScoreAnswer)
    }

    /// (required, optional) context keys.
    pub fn schema(self) -> (&'static [&'static str], &'static [&'static str]) {
        use field::*;
        match self {
            RoleKind::Expand => (&[QUESTION], &[PRIOR_EXPANSION, DOCUMENTS, GOLD]),
            RoleKind::RankWindow => (&[QUESTION, EXPANSION, DOCUMENTS], &[]),
            RoleKind::Answer => (&[QUESTION, EVIDENCE], &[]),
            RoleKind::ScoreExpansion => (&[QUESTION, CANDIDATE], &[GENERATOR_PROMPT, GOLD]),
            RoleKind::ScoreReranking => (&[QUESTION, EXPANSION, DOCUMENTS], &[RERANKER_PROMPT, GOLD]),
            RoleKind::ScoreAnswer => (&[QUESTION, EXPANSION, DOCUMENTS, GOLD], &[ANSWER_PROMPT]),
            RoleKind::ProposePrompt => {
                (&[TARGET_KIND, CURRENT_PROMPT, QUESTION, TARGET], &[PRIOR_EXPANSION, PRIOR_DOCUMENTS, PRIOR_ANSWER])
            }
        }
    }
}

impl fmt::Display for RoleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RoleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RoleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("role kind", s.to_owned()))
    }
}

/// Context field names.
pub mod field {
    pub const QUESTION: &str = "question";
    pub const EXPANSION: &str = "expansion";
    pub const DOCUMENTS: &str = "documents";
    pub const EVIDENCE: &str = "evidence";
    /// Gold answers, one per line.
    pub const GOLD: &str = "gold";
    pub const CANDIDATE: &str = "candidate";
    pub const GENERATOR_PROMPT: &str = "generator_prompt";
    pub const RERANKER_PROMPT: &str = "reranker_prompt";
    pub const ANSWER_PROMPT: &str = "answer_prompt";
    pub const PRIOR_EXPANSION: &str = "prior_expansion";
    pub const PRIOR_DOCUMENTS: &str = "prior_documents";
    pub const PRIOR_ANSWER: &str = "prior_answer";
    pub const TARGET: &str = "target";
    pub const TARGET_KIND: &str = "target_kind";
    pub const CURRENT_PROMPT: &str = "current_prompt";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleRequest {
    pub role_kind: RoleKind,
    pub prompt: String,
    pub context: Vec<(String, String)>,
    pub temperature: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl RoleRequest {
    pub fn new<K, V>(role_kind: RoleKind, prompt: impl Into<String>, context: impl IntoIterator<Item = (K, V)>) -> Result<Self>
    where
        K: Into<String>,
        V: Into<String>,
    {
        let context: Vec<(String, String)> = context.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        let (required, optional) = role_kind.schema();
        for (k, _) in &context {
            if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
                return Err(Error::invalid("role request", format!("field {k:?} not allowed for {role_kind}")));
            }
        }
        for r in required {
            if !context.iter().any(|(k, _)| k == r) {
                return Err(Error::invalid("role request", format!("{role_kind} requires field {r:?}")));
            }
        }
        Ok(RoleRequest { role_kind, prompt: prompt.into(), context, temperature: 0.0, sample_count: 1, seed: 0 })
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature.max(0.0);
        self
    }

    pub fn with_samples(mut self, sample_count: usize) -> Self {
        self.sample_count = sample_count.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn field(&self, key: &str) -> Option<&str> {
        self.context.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Hex SHA-256 over the context fields only. Scripted tables key on this.
    pub fn context_digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.context {
            h.update((k.len() as u64).to_le_bytes());
            h.update(k.as_bytes());
            h.update((v.len() as u64).to_le_bytes());
            h.update(v.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleResponse {
    pub samples: Vec<String>,
    pub backend_id: String,
    pub cached: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_enforced() {
        assert!(RoleRequest::new(RoleKind::Expand, "p", [("question", "q")]).is_ok());
        assert!(RoleRequest::new(RoleKind::Expand, "p", [("target", "q")]).is_err());
        assert!(RoleRequest::new(RoleKind::RankWindow, "p", [("question", "q")]).is_err());
    }

    #[test]
    fn sample_count_floor() {
        let r = RoleRequest::new(RoleKind::Expand, "p", [("question", "q")]).unwrap().with_samples(0);
        assert_eq!(r.sample_count, 1);
    }

    #[test]
    fn digest_depends_on_context_only() {
        let a = RoleRequest::new(RoleKind::Answer, "p1", [("question", "q"), ("evidence", "e")]).unwrap();
        let b = RoleRequest::new(RoleKind::Answer, "p2", [("question", "q"), ("evidence", "e")]).unwrap().with_seed(9);
        let c = RoleRequest::new(RoleKind::Answer, "p1", [("question", "q"), ("evidence", "e2")]).unwrap();
        assert_eq!(a.context_digest(), b.context_digest());
        assert_ne!(a.context_digest(), c.context_digest());
    }

    #[test]
    fn role_kind_round_trip() {
        for k in RoleKind::ALL {
            assert_eq!(k.as_str().parse::<RoleKind>().unwrap(), k);
        }
    }
}
