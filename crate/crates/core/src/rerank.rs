//! Sliding-window listwise reranking of `n` candidates down to `k = w - l`.
//!
//! The first window covers the last `w` positions. After each window is
//! reordered, the window start moves `l` positions toward the front, so the
//! top `w - l` of the previous window are carried into the next one. The
//! final start clamps to 0 and may overlap the previous window by more than
//! `w - l`; the ranker always sees exactly `w` documents. When the ranker
//! sorts every window by one fixed total order, the carried block always
//! holds the best `w - l` documents of the suffix processed so far, so the
//! returned prefix is the global top-k under that order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roles::{RankOutcome, RoleSet, ScoreOutcome};
use crate::scalar::argmax_first;
use crate::types::{reindex, Document, Expansion, Question, ScoredDocList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct WindowConfig {
    w: usize,
    l: usize,
}

#[derive(Deserialize)]
struct RawWindow {
    w: usize,
    l: usize,
}

impl TryFrom<RawWindow> for WindowConfig {
    type Error = Error;

    fn try_from(raw: RawWindow) -> Result<Self> {
        WindowConfig::new(raw.w, raw.l)
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { w: 20, l: 10 }
    }
}

impl WindowConfig {
    pub fn new(w: usize, l: usize) -> Result<Self> {
        if w < 2 || l < 1 || l >= w {
            return Err(Error::invalid("window config", format!("need w >= 2 and 1 <= l < w, got w={w} l={l}")));
        }
        Ok(WindowConfig { w, l })
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Number of documents kept.
    pub fn k(&self) -> usize {
        self.w - self.l
    }

    /// Start positions of the windows, back to front.
    pub fn window_starts(&self, n: usize) -> Vec<usize> {
        if n <= self.w {
            return vec![0];
        }
        let mut starts = vec![n - self.w];
        while let Some(&last) = starts.last() {
            if last == 0 {
                break;
            }
            starts.push(last.saturating_sub(self.l));
        }
        starts
    }

    /// `1` if `n <= w`, else `ceil((n - w) / l) + 1`.
    pub fn window_count(&self, n: usize) -> usize {
        if n <= self.w {
            1
        } else {
            (n - self.w).div_ceil(self.l) + 1
        }
    }
}

/// Reorders one window of documents.
pub trait WindowRanker {
    fn rank(&self, q: &Question, e: &Expansion, window: &[Document], theta_d: &str, seed: u64) -> RankOutcome;
}

impl WindowRanker for RoleSet {
    fn rank(&self, q: &Question, e: &Expansion, window: &[Document], theta_d: &str, seed: u64) -> RankOutcome {
        self.rank_window(q, e, window, theta_d, seed)
    }
}

impl<F> WindowRanker for F
where
    F: Fn(&[Document]) -> Vec<Document>,
{
    fn rank(&self, _q: &Question, _e: &Expansion, window: &[Document], _theta_d: &str, _seed: u64) -> RankOutcome {
        RankOutcome { docs: self(window), fallback: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutput {
    /// First `min(k, n)` documents, ranks `0..`.
    pub top: Vec<Document>,
    /// All `n` candidates in final order.
    pub full_order: Vec<Document>,
    pub window_calls: usize,
    pub fallbacks: usize,
}

fn same_members(a: &[Document], b: &[Document]) -> bool {
    let mut x: Vec<&str> = a.iter().map(Document::doc_id).collect();
    let mut y: Vec<&str> = b.iter().map(Document::doc_id).collect();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}

pub fn sliding_window_rerank(
    docs: &[Document],
    q: &Question,
    e: &Expansion,
    theta_d: &str,
    cfg: WindowConfig,
    ranker: &dyn WindowRanker,
    seed: u64,
) -> Result<RerankOutput> {
    if docs.is_empty() {
        return Err(Error::NoCandidates);
    }
    let n = docs.len();
    let mut order = docs.to_vec();
    let mut window_calls = 0;
    let mut fallbacks = 0;

    for start in cfg.window_starts(n) {
        let end = (start + cfg.w).min(n);
        let outcome = ranker.rank(q, e, &order[start..end], theta_d, seed);
        window_calls += 1;
        // a ranker that drops or invents documents is treated as a fallback
        if outcome.fallback || !same_members(&outcome.docs, &order[start..end]) {
            fallbacks += 1;
            continue;
        }
        order.splice(start..end, outcome.docs);
    }

    let full_order = reindex(order);
    let top = full_order[..cfg.k().min(n)].to_vec();
    Ok(RerankOutput { top, full_order, window_calls, fallbacks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRerank {
    pub best_index: usize,
    pub candidates: Vec<ScoredDocList>,
    /// Full final order of the chosen candidate.
    pub best_full_order: Vec<Document>,
    pub window_calls: usize,
    pub fallbacks: usize,
    pub warnings: Vec<String>,
}

impl CandidateRerank {
    pub fn best(&self) -> &[Document] {
        &self.candidates[self.best_index].docs
    }
}

/// Runs the sliding window `c` times (candidate `i` uses seed `seed + i`),
/// scores each top-k list with `evaluator`, and keeps the highest scored,
/// ties to the lowest index.
#[allow(clippy::too_many_arguments)]
pub fn rerank_with_candidates<E>(
    docs: &[Document],
    q: &Question,
    e: &Expansion,
    theta_d: &str,
    cfg: WindowConfig,
    ranker: &dyn WindowRanker,
    mut evaluator: E,
    c: usize,
    seed: u64,
) -> Result<CandidateRerank>
where
    E: FnMut(&[Document]) -> ScoreOutcome,
{
    if c == 0 {
        return Err(Error::invalid("rerank candidates", "c must be >= 1"));
    }
    let mut candidates = Vec::with_capacity(c);
    let mut orders = Vec::with_capacity(c);
    let mut window_calls = 0;
    let mut fallbacks = 0;
    let mut warnings = Vec::new();
    for i in 0..c {
        let out = sliding_window_rerank(docs, q, e, theta_d, cfg, ranker, seed.wrapping_add(i as u64))?;
        window_calls += out.window_calls;
        fallbacks += out.fallbacks;
        let scored = evaluator(&out.top);
        warnings.extend(scored.warning);
        candidates.push(ScoredDocList { docs: out.top, score: scored.score });
        orders.push(out.full_order);
    }
    let scores: Vec<f64> = candidates.iter().map(|c| c.score.value()).collect();
    let best_index = argmax_first(&scores).unwrap_or(0);
    Ok(CandidateRerank {
        best_index,
        best_full_order: orders.swap_remove(best_index),
        candidates,
        window_calls,
        fallbacks,
        warnings,
    })
}
