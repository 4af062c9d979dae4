//! Exact match, answer recall over documents, recall@k and bootstrap EM.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::scalar::{mean, Real};
use crate::types::{Document, GoldAnswers, Trace};

fn is_article(word: &str) -> bool {
    matches!(word, "a" | "an" | "the")
}

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct.split_whitespace().filter(|w| !is_article(w)).collect::<Vec<_>>().join(" ")
}

pub fn exact_match_str(pred: &str, gold: &str) -> bool {
    normalize_answer(pred) == normalize_answer(gold)
}

/// 1 iff the normalized prediction equals any normalized gold answer.
pub fn exact_match(pred: &str, gold: &GoldAnswers) -> u8 {
    u8::from(gold.answers().iter().any(|g| exact_match_str(pred, g)))
}

/// Normalized substring containment of any answer in `text`.
pub fn contains_answer<S: AsRef<str>>(text: &str, answers: &[S]) -> bool {
    let hay = normalize_answer(text);
    answers.iter().any(|a| {
        let needle = normalize_answer(a.as_ref());
        !needle.is_empty() && hay.contains(&needle)
    })
}

/// 1 iff any gold answer occurs in the concatenated document texts.
pub fn answer_hit(docs: &[Document], gold: &GoldAnswers) -> u8 {
    let joined = docs.iter().map(Document::text).collect::<Vec<_>>().join(" ");
    u8::from(contains_answer(&joined, gold.answers()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub question_id: String,
    pub em: u8,
    pub hits: BTreeMap<usize, u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<F> {
    pub em: F,
    pub em_bootstrap_mean: F,
    pub em_bootstrap_rounds: usize,
    pub recall_at: BTreeMap<usize, F>,
    pub per_example: Vec<ExampleResult>,
    pub fallback_rate: F,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub bootstrap_rounds: usize,
    pub seed: u64,
    /// Count the chosen expansion text as part of the evidence.
    pub include_expansion: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { ks: vec![2, 4, 8], bootstrap_rounds: 10, seed: 0, include_expansion: false }
    }
}

/// Mean EM over `rounds` resamples (with replacement, same size).
pub fn bootstrap_mean<F: Real>(bits: &[u8], rounds: usize, seed: u64) -> F {
    let as_real: Vec<F> = bits.iter().map(|&b| F::from_f64_lossy(f64::from(b))).collect();
    if rounds == 0 || bits.is_empty() {
        return mean(&as_real).unwrap_or_else(F::zero);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let round_means: Vec<F> = (0..rounds)
        .map(|_| {
            let sample: Vec<F> = (0..bits.len()).map(|_| as_real[rng.random_range(0..bits.len())]).collect();
            mean(&sample).unwrap_or_else(F::zero)
        })
        .collect();
    mean(&round_means).unwrap_or_else(F::zero)
}

fn trace_hit(trace: &Trace, k: usize, gold: &GoldAnswers, include_expansion: bool) -> u8 {
    let prefix = &trace.reranked[..k.min(trace.reranked.len())];
    if answer_hit(prefix, gold) == 1 {
        return 1;
    }
    let from_expansion = include_expansion
        && trace.chosen_expansion.as_ref().is_some_and(|e| contains_answer(e.text(), gold.answers()));
    u8::from(from_expansion)
}

pub fn evaluate<F: Real>(traces: &[Trace], dataset: &[Example], options: &EvalOptions) -> Result<EvalReport<F>> {
    let by_id: HashMap<&str, &Example> = dataset.iter().map(|e| (e.question.id(), e)).collect();
    let mut ks = options.ks.clone();
    ks.sort_unstable();
    ks.dedup();

    let mut per_example = Vec::with_capacity(traces.len());
    for trace in traces {
        let example = by_id
            .get(trace.question_id.as_str())
            .ok_or_else(|| Error::invalid("traces", format!("question id {:?} not in dataset", trace.question_id)))?;
        let hits = ks.iter().map(|&k| (k, trace_hit(trace, k, &example.gold, options.include_expansion))).collect();
        per_example.push(ExampleResult {
            question_id: trace.question_id.clone(),
            em: exact_match(&trace.answer, &example.gold),
            hits,
        });
    }

    let to_real = |b: u8| F::from_f64_lossy(f64::from(b));
    let em_bits: Vec<u8> = per_example.iter().map(|r| r.em).collect();
    let em = mean(&em_bits.iter().map(|&b| to_real(b)).collect::<Vec<_>>()).unwrap_or_else(F::zero);
    let recall_at = ks
        .iter()
        .map(|&k| {
            let bits: Vec<F> = per_example.iter().map(|r| to_real(r.hits[&k])).collect();
            (k, mean(&bits).unwrap_or_else(F::zero))
        })
        .collect();
    let calls: usize = traces.iter().map(|t| t.window_calls).sum();
    let fallbacks: usize = traces.iter().map(|t| t.window_fallbacks).sum();
    let fallback_rate =
        if calls == 0 { F::zero() } else { F::from_usize_lossy(fallbacks) / F::from_usize_lossy(calls) };

    Ok(EvalReport {
        em,
        em_bootstrap_mean: bootstrap_mean(&em_bits, options.bootstrap_rounds, options.seed),
        em_bootstrap_rounds: options.bootstrap_rounds,
        recall_at,
        per_example,
        fallback_rate,
    })
}

impl<F: Real> EvalReport<F> {
    /// Aligned plain-text summary.
    pub fn to_table(&self) -> String {
        let mut header = format!("{:>8} {:>10}", "EM", "EM(boot)");
        let mut row = format!("{:>8.4} {:>10.4}", self.em.to_f64_lossy(), self.em_bootstrap_mean.to_f64_lossy());
        for (k, r) in &self.recall_at {
            let _ = write!(header, " {:>8}", format!("Top-{k}"));
            let _ = write!(row, " {:>8.4}", r.to_f64_lossy());
        }
        let _ = write!(header, " {:>9}", "fallback");
        let _ = write!(row, " {:>9.4}", self.fallback_rate.to_f64_lossy());
        format!("{header}\n{row}\n")
    }
}
