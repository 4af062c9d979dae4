use std::collections::{HashMap, HashSet};

use sha2::{Digest, Sha256};

use super::backend::{Backend, BackendError};
use super::render::{format_ranking, split_rendered};
use super::request::{field, RoleKind, RoleRequest};
use crate::retrieval::{is_stopword, tokenize};

const VOCAB: &[&str] = &[
    "history", "record", "champion", "season", "founded", "capital", "river", "century", "author", "treaty", "election",
    "festival", "railway", "island", "province", "cathedral", "museum", "symphony", "dynasty", "empire", "harbor",
    "mountain", "stadium", "league", "award", "novel", "painting", "emperor", "parliament", "republic", "valley",
    "coast", "bridge", "village", "university", "theater", "battle", "expedition", "charter", "manuscript", "archive",
    "frontier", "monastery", "observatory", "pioneer", "regatta", "steeplechase", "tournament", "voyage", "citadel",
    "delta", "estuary", "fortress", "garrison", "heritage", "inscription", "jubilee", "kingdom", "lighthouse",
    "meridian", "navigation", "orchestra", "peninsula", "quarry",
];

/// Deterministic canned backend. Every response is a pure function of the
/// request and the backend seed.
#[derive(Debug, Clone)]
pub struct MockBackend {
    id: String,
    seed: u64,
    default_answer: Option<String>,
    answers: HashMap<String, String>,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { id: "mock".into(), seed, default_answer: None, answers: HashMap::new() }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Answer returned for every question without a specific canned answer.
    pub fn with_default_answer(mut self, answer: impl Into<String>) -> Self {
        self.default_answer = Some(answer.into());
        self
    }

    /// Canned answer keyed by question text.
    pub fn with_answer(mut self, question: impl Into<String>, answer: impl Into<String>) -> Self {
        self.answers.insert(question.into(), answer.into());
        self
    }

    fn hash(&self, request: &RoleRequest, salt: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(request.seed.to_le_bytes());
        h.update(salt.to_le_bytes());
        h.update(request.role_kind.as_str().as_bytes());
        h.update(request.prompt.as_bytes());
        h.update(request.context_digest().as_bytes());
        let out = h.finalize();
        u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
    }

    fn expansions(&self, request: &RoleRequest) -> Vec<String> {
        let question = request.field(field::QUESTION).unwrap_or_default();
        let mut seen = HashSet::new();
        (0..request.sample_count)
            .map(|i| {
                let h = self.hash(request, i as u64);
                let words: Vec<&str> = (0..4).map(|j| VOCAB[((h >> (j * 12)) % VOCAB.len() as u64) as usize]).collect();
                let mut text = format!("Background on {}: {}.", question.trim_end_matches('?'), words.join(" "));
                if !seen.insert(text.clone()) {
                    text = format!("{text} ({})", i + 1);
                    seen.insert(text.clone());
                }
                text
            })
            .collect()
    }

    /// Orders the window by lexical overlap with question and expansion.
    fn ranking(&self, request: &RoleRequest) -> String {
        let query: HashSet<String> = tokenize(&format!(
            "{} {}",
            request.field(field::QUESTION).unwrap_or_default(),
            request.field(field::EXPANSION).unwrap_or_default()
        ))
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect();
        let passages = split_rendered(request.field(field::DOCUMENTS).unwrap_or_default());
        let mut order: Vec<(usize, usize)> = passages
            .iter()
            .enumerate()
            .map(|(i, p)| (i, tokenize(p).iter().filter(|t| query.contains(*t)).count()))
            .collect();
        order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        format_ranking(&order.into_iter().map(|(i, _)| i).collect::<Vec<_>>())
    }

    fn answer(&self, request: &RoleRequest) -> String {
        let question = request.field(field::QUESTION).unwrap_or_default();
        if let Some(a) = self.answers.get(question).or(self.default_answer.as_ref()) {
            return a.clone();
        }
        let evidence = split_rendered(request.field(field::EVIDENCE).unwrap_or_default()).join(" ");
        let tokens: Vec<&str> = evidence.split_whitespace().filter(|t| t.len() > 3).collect();
        if tokens.is_empty() {
            return "unknown".into();
        }
        let pick = tokens[(self.hash(request, 0) % tokens.len() as u64) as usize];
        pick.trim_matches(|c: char| !c.is_alphanumeric()).to_owned()
    }

    fn score(&self, request: &RoleRequest, i: usize) -> String {
        let h = self.hash(request, i as u64);
        format!("{:.4}", (h % 10_001) as f64 / 10_000.0)
    }

    fn proposal(&self, request: &RoleRequest, i: usize) -> String {
        let current = request.field(field::CURRENT_PROMPT).unwrap_or_default();
        format!("{current} (variant {:04x})", self.hash(request, i as u64) & 0xffff)
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &RoleRequest) -> Result<Vec<String>, BackendError> {
        let n = request.sample_count;
        Ok(match request.role_kind {
            RoleKind::Expand => self.expansions(request),
            RoleKind::RankWindow => vec![self.ranking(request); n],
            RoleKind::Answer => vec![self.answer(request); n],
            RoleKind::ScoreExpansion | RoleKind::ScoreReranking | RoleKind::ScoreAnswer => {
                (0..n).map(|i| self.score(request, i)).collect()
            }
            RoleKind::ProposePrompt => (0..n).map(|i| self.proposal(request, i)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roles::render::parse_ranking;

    fn expand(seed: u64, m: usize) -> RoleRequest {
        RoleRequest::new(RoleKind::Expand, "expand", [("question", "when did little polveir win the grand national")])
            .unwrap()
            .with_seed(seed)
            .with_samples(m)
    }

    #[test]
    fn deterministic_and_distinct() {
        let b = MockBackend::new(7);
        let a = b.complete(&expand(7, 3)).unwrap();
        assert_eq!(a, b.complete(&expand(7, 3)).unwrap());
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 3);
        assert_ne!(a, MockBackend::new(8).complete(&expand(7, 3)).unwrap());
    }

    #[test]
    fn ranking_is_valid_permutation() {
        let req = RoleRequest::new(
            RoleKind::RankWindow,
            "rank",
            [
                ("question", "grand national winner"),
                ("expansion", "steeplechase"),
                ("documents", "[1] cooking tips\n[2] the grand national steeplechase\n[3] national parks"),
            ],
        )
        .unwrap();
        let out = MockBackend::new(1).complete(&req).unwrap();
        assert_eq!(parse_ranking(&out[0], 3), Some(vec![1, 2, 0]));
    }

    #[test]
    fn canned_answers() {
        let b = MockBackend::new(0).with_default_answer("1989").with_answer("who?", "Cyrus");
        let req = |q: &str| RoleRequest::new(RoleKind::Answer, "a", [("question", q), ("evidence", "")]).unwrap();
        assert_eq!(b.complete(&req("when?")).unwrap(), ["1989"]);
        assert_eq!(b.complete(&req("who?")).unwrap(), ["Cyrus"]);
    }

    #[test]
    fn scores_parse_into_unit_interval() {
        let req = RoleRequest::new(RoleKind::ScoreExpansion, "s", [("question", "q"), ("candidate", "c")])
            .unwrap()
            .with_samples(5);
        for s in MockBackend::new(3).complete(&req).unwrap() {
            let v: f64 = s.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
