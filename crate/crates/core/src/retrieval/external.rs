use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{CorpusIndex, Retriever};
use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::types::{reindex, Document, Question};

#[derive(Debug, Deserialize)]
struct RankedDoc {
    doc_id: String,
    score: f64,
}

#[derive(Debug, Deserialize)]
struct RankingLine {
    qid: String,
    ranking: Vec<RankedDoc>,
}

/// Precomputed per-question rankings (e.g. from a dense retriever) served
/// in stored order.
#[derive(Debug, Clone)]
pub struct ExternalRanking {
    rankings: HashMap<String, Vec<Document>>,
}

impl ExternalRanking {
    pub fn load(index: &CorpusIndex, path: impl AsRef<Path>) -> Result<Self> {
        let lines: Vec<RankingLine> = read_jsonl(path.as_ref())?;
        Self::from_rankings(index, lines.into_iter().map(|l| (l.qid, l.ranking.into_iter().map(|r| (r.doc_id, r.score)).collect())))
    }

    pub fn from_rankings<I>(index: &CorpusIndex, rankings: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<(String, f64)>)>,
    {
        let mut out = HashMap::new();
        for (qid, ranking) in rankings {
            let docs = ranking
                .into_iter()
                .enumerate()
                .map(|(rank, (doc_id, score))| {
                    let doc = index.document(&doc_id).ok_or_else(|| Error::UnknownDocId(doc_id.clone()))?;
                    doc.scored(score, rank)
                })
                .collect::<Result<Vec<_>>>()?;
            out.insert(qid, docs);
        }
        Ok(ExternalRanking { rankings: out })
    }
}

impl Retriever for ExternalRanking {
    fn retrieve(&self, question: &Question, _query_text: &str, n: usize) -> Result<Vec<Document>> {
        let docs = self.rankings.get(question.id()).ok_or_else(|| Error::MissingQuestion(question.id().to_owned()))?;
        Ok(reindex(docs.iter().take(n).cloned()))
    }
}
