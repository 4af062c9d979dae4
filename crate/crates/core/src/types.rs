//! Domain value types shared across the pipeline.
//!
//! Everything here is immutable after construction. Constructors validate;
//! deserialization goes through the same constructors.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawQuestion")]
pub struct Question {
    id: String,
    text: String,
}

#[derive(Deserialize)]
struct RawQuestion {
    id: String,
    text: String,
}

impl TryFrom<RawQuestion> for Question {
    type Error = Error;

    fn try_from(raw: RawQuestion) -> Result<Self> {
        Question::new(raw.id, raw.text)
    }
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("question", "text is empty"));
        }
        Ok(Question { id: id.into(), text })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Ground-truth answers for one question. At least one, none empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct GoldAnswers(Vec<String>);

impl TryFrom<Vec<String>> for GoldAnswers {
    type Error = Error;

    fn try_from(answers: Vec<String>) -> Result<Self> {
        GoldAnswers::new(answers)
    }
}

impl From<GoldAnswers> for Vec<String> {
    fn from(gold: GoldAnswers) -> Self {
        gold.0
    }
}

impl GoldAnswers {
    pub fn new<S: Into<String>>(answers: impl IntoIterator<Item = S>) -> Result<Self> {
        let answers: Vec<String> = answers.into_iter().map(Into::into).collect();
        if answers.is_empty() {
            return Err(Error::invalid("gold answers", "no answers"));
        }
        if answers.iter().any(|a| a.is_empty()) {
            return Err(Error::invalid("gold answers", "empty answer string"));
        }
        Ok(GoldAnswers(answers))
    }

    pub fn answers(&self) -> &[String] {
        &self.0
    }

    pub fn primary(&self) -> &str {
        &self.0[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct Document {
    doc_id: String,
    title: String,
    text: String,
    retrieval_score: f64,
    rank: usize,
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: String,
    #[serde(default)]
    title: String,
    text: String,
    #[serde(default)]
    retrieval_score: f64,
    #[serde(default)]
    rank: usize,
}

impl TryFrom<RawDocument> for Document {
    type Error = Error;

    fn try_from(raw: RawDocument) -> Result<Self> {
        Document::new(raw.doc_id, raw.title, raw.text)?.scored(raw.retrieval_score, raw.rank)
    }
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let doc_id = doc_id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("document", format!("{doc_id:?} has empty text")));
        }
        Ok(Document { doc_id, title: title.into(), text, retrieval_score: 0.0, rank: 0 })
    }

    /// Copy carrying a retrieval score and list position.
    pub fn scored(&self, retrieval_score: f64, rank: usize) -> Result<Self> {
        if !retrieval_score.is_finite() || retrieval_score < 0.0 {
            return Err(Error::invalid("document", format!("retrieval score {retrieval_score} for {:?}", self.doc_id)));
        }
        Ok(Document { retrieval_score, rank, ..self.clone() })
    }

    pub(crate) fn with_rank(&self, rank: usize) -> Self {
        Document { rank, ..self.clone() }
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn retrieval_score(&self) -> f64 {
        self.retrieval_score
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Reassigns ranks 0..len in list order.
pub(crate) fn reindex(docs: impl IntoIterator<Item = Document>) -> Vec<Document> {
    docs.into_iter().enumerate().map(|(i, d)| d.with_rank(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawExpansion")]
pub struct Expansion {
    text: String,
    source_prompt_version: u64,
}

#[derive(Deserialize)]
struct RawExpansion {
    text: String,
    #[serde(default)]
    source_prompt_version: u64,
}

impl TryFrom<RawExpansion> for Expansion {
    type Error = Error;

    fn try_from(raw: RawExpansion) -> Result<Self> {
        Expansion::new(raw.text, raw.source_prompt_version)
    }
}

impl Expansion {
    pub fn new(text: impl Into<String>, source_prompt_version: u64) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid("expansion", "text is empty"));
        }
        Ok(Expansion { text, source_prompt_version })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn source_prompt_version(&self) -> u64 {
        self.source_prompt_version
    }
}

/// Evaluator score, clamped into `[0, 1]` at construction. NaN maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Score<F>(F);

impl<F: Real> Score<F> {
    pub fn new(value: F) -> Self {
        if value.is_nan() {
            return Score(F::zero());
        }
        Score(value.max(F::zero()).min(F::one()))
    }

    pub fn zero() -> Self {
        Score(F::zero())
    }

    pub fn one() -> Self {
        Score(F::one())
    }

    pub fn value(self) -> F {
        self.0
    }
}

impl<F: Real> fmt::Display for Score<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl<F: Real + Serialize> Serialize for Score<F> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de, F: Real + Deserialize<'de>> Deserialize<'de> for Score<F> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        F::deserialize(deserializer).map(Score::new)
    }
}

/// The three learnable prompts. Only [`crate::prompt_opt::PromptStore`]
/// produces a new version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPromptSet")]
pub struct PromptSet {
    version: u64,
    theta_e: String,
    theta_d: String,
    theta_a: String,
}

#[derive(Deserialize)]
struct RawPromptSet {
    #[serde(default)]
    version: u64,
    theta_e: String,
    theta_d: String,
    theta_a: String,
}

impl TryFrom<RawPromptSet> for PromptSet {
    type Error = Error;

    fn try_from(raw: RawPromptSet) -> Result<Self> {
        let mut set = PromptSet::new(raw.theta_e, raw.theta_d, raw.theta_a)?;
        set.version = raw.version;
        Ok(set)
    }
}

impl PromptSet {
    pub fn new(theta_e: impl Into<String>, theta_d: impl Into<String>, theta_a: impl Into<String>) -> Result<Self> {
        let (theta_e, theta_d, theta_a) = (theta_e.into(), theta_d.into(), theta_a.into());
        for (name, p) in [("theta_e", &theta_e), ("theta_d", &theta_d), ("theta_a", &theta_a)] {
            if p.trim().is_empty() {
                return Err(Error::invalid("prompt set", format!("{name} is empty")));
            }
        }
        Ok(PromptSet { version: 0, theta_e, theta_d, theta_a })
    }

    pub(crate) fn next_version(&self, theta_e: String, theta_d: String, theta_a: String) -> Result<Self> {
        let mut next = PromptSet::new(theta_e, theta_d, theta_a)?;
        next.version = self.version + 1;
        Ok(next)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn theta_e(&self) -> &str {
        &self.theta_e
    }

    pub fn theta_d(&self) -> &str {
        &self.theta_d
    }

    pub fn theta_a(&self) -> &str {
        &self.theta_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Expansion,
    Retrieval,
    Rerank,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    /// Offset from the start of the run.
    pub start_ms: f64,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExpansion {
    pub expansion: Expansion,
    pub score: Score<f64>,
}

/// One item of the reader's evidence context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvidenceItem {
    Expansion { text: String },
    Document { doc_id: String, text: String },
}

impl EvidenceItem {
    pub fn text(&self) -> &str {
        match self {
            EvidenceItem::Expansion { text } | EvidenceItem::Document { text, .. } => text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocList {
    pub docs: Vec<Document>,
    pub score: Score<f64>,
}

/// Full record of one pipeline run, including the latent evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub question_id: String,
    pub prompt_version: u64,
    pub expansion_candidates: Vec<ScoredExpansion>,
    pub chosen_expansion: Option<Expansion>,
    pub chosen_expansion_index: Option<usize>,
    pub retrieved: Vec<Document>,
    pub rerank_candidates: Vec<ScoredDocList>,
    pub chosen_rerank_index: Option<usize>,
    pub reranked: Vec<Document>,
    pub evidence: Vec<EvidenceItem>,
    pub answer: String,
    pub window_calls: usize,
    pub window_fallbacks: usize,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub timing: Vec<StageTiming>,
}

impl Trace {
    pub fn empty(question_id: impl Into<String>, prompt_version: u64) -> Self {
        Trace {
            question_id: question_id.into(),
            prompt_version,
            expansion_candidates: Vec::new(),
            chosen_expansion: None,
            chosen_expansion_index: None,
            retrieved: Vec::new(),
            rerank_candidates: Vec::new(),
            chosen_rerank_index: None,
            reranked: Vec::new(),
            evidence: Vec::new(),
            answer: String::new(),
            window_calls: 0,
            window_fallbacks: 0,
            warnings: Vec::new(),
            error: None,
            timing: Vec::new(),
        }
    }

    /// Zeroes every wall-clock field so traces can be compared byte for byte.
    pub fn without_timing(mut self) -> Self {
        for t in &mut self.timing {
            t.start_ms = 0.0;
            t.duration_ms = 0.0;
        }
        self
    }
}

fn unique_ranks(docs: &[Document]) -> bool {
    let mut seen = HashSet::with_capacity(docs.len());
    docs.iter().all(|d| seen.insert(d.rank()))
}

/// True iff every trace invariant holds.
pub fn validate_trace(trace: &Trace) -> bool {
    if trace.error.is_some() || trace.answer.trim().is_empty() {
        return false;
    }
    let Some(chosen) = &trace.chosen_expansion else {
        return false;
    };
    if !trace.expansion_candidates.iter().any(|c| &c.expansion == chosen) {
        return false;
    }
    let retrieved: HashSet<&str> = trace.retrieved.iter().map(Document::doc_id).collect();
    if !trace.reranked.iter().all(|d| retrieved.contains(d.doc_id())) {
        return false;
    }
    if !unique_ranks(&trace.retrieved) || !unique_ranks(&trace.reranked) {
        return false;
    }
    trace.timing.windows(2).all(|w| w[0].start_ms <= w[1].start_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn question_rejects_blank() {
        assert!(Question::new("q", "   ").is_err());
        assert_eq!(Question::new("q", "who?").unwrap().text(), "who?");
    }

    #[test]
    fn gold_answers_rules() {
        assert!(GoldAnswers::new(Vec::<String>::new()).is_err());
        assert!(GoldAnswers::new(["1989", ""]).is_err());
        let g: GoldAnswers = serde_json::from_str(r#"["Cyrus","Kourosh"]"#).unwrap();
        assert_eq!(g.primary(), "Cyrus");
    }

    #[test]
    fn document_score_must_be_finite() {
        let d = Document::new("d1", "", "text").unwrap();
        assert!(d.scored(f64::NAN, 0).is_err());
        assert!(d.scored(-1.0, 0).is_err());
        assert!(Document::new("d1", "t", " ").is_err());
    }

    #[test]
    fn score_clamps() {
        assert_eq!(Score::new(1.7).value(), 1.0);
        assert_eq!(Score::new(-0.2f32).value(), 0.0);
        assert_eq!(Score::new(f64::NAN).value(), 0.0);
        let s: Score<f64> = serde_json::from_str("3.5").unwrap();
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn prompt_set_versions() {
        let p = PromptSet::new("e", "d", "a").unwrap();
        assert_eq!(p.version(), 0);
        let q = p.next_version("e2".into(), "d".into(), "a".into()).unwrap();
        assert_eq!(q.version(), 1);
        assert!(p.next_version("".into(), "d".into(), "a".into()).is_err());
        assert!(serde_json::from_str::<PromptSet>(r#"{"version":3,"theta_e":"","theta_d":"d","theta_a":"a"}"#).is_err());
    }

    fn doc(id: &str, rank: usize) -> Document {
        Document::new(id, "", format!("text of {id}")).unwrap().with_rank(rank)
    }

    fn good_trace() -> Trace {
        let e = Expansion::new("background", 0).unwrap();
        let mut t = Trace::empty("q1", 0);
        t.expansion_candidates = vec![ScoredExpansion { expansion: e.clone(), score: Score::new(0.5) }];
        t.chosen_expansion = Some(e);
        t.retrieved = vec![doc("a", 0), doc("b", 1), doc("c", 2)];
        t.reranked = vec![doc("c", 0), doc("a", 1)];
        t.answer = "1989".into();
        t
    }

    #[test]
    fn validate_trace_cases() {
        assert!(validate_trace(&good_trace()));

        let mut t = good_trace();
        t.reranked.push(doc("zz", 2));
        assert!(!validate_trace(&t));

        let mut t = good_trace();
        t.answer = "  ".into();
        assert!(!validate_trace(&t));

        let mut t = good_trace();
        t.chosen_expansion = Some(Expansion::new("other", 0).unwrap());
        assert!(!validate_trace(&t));

        let mut t = good_trace();
        t.reranked[1] = doc("a", 0);
        assert!(!validate_trace(&t));
    }

    proptest! {
        #[test]
        fn score_clamp_idempotent(x in proptest::num::f64::ANY) {
            let once = Score::new(x);
            let twice = Score::new(once.value());
            prop_assert_eq!(once, twice);
            prop_assert!((0.0..=1.0).contains(&once.value()));
        }
    }
}
