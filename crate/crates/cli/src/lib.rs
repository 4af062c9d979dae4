//! Command implementations behind the `odqa` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use odqa_core::config::RunConfig;
use odqa_core::dataset::{load_dataset, Example};
use odqa_core::io::{read_json, read_jsonl, write_json_atomic, write_jsonl};
use odqa_core::metrics::{evaluate, EvalOptions};
use odqa_core::pipeline::{Pipeline, RerankStrategy};
use odqa_core::prompt_opt::{PromptStore, TrainOutcome, Trainer};
use odqa_core::retrieval::{load_corpus, Bm25Retriever, CorpusIndex, ExternalRanking, Retriever};
use odqa_core::roles::RoleSet;
use odqa_core::types::{PromptSet, Trace};
use odqa_core::EvalReport;

pub const DEFAULT_THETA_E: &str =
    "Write a short background passage that would help answer the question. Mention names, dates and places.";
pub const DEFAULT_THETA_D: &str =
    "Rank the passages by how likely they contain the answer to the question. Use the background as a hint.";
pub const DEFAULT_THETA_A: &str = "Answer the question with a short phrase taken from the evidence.";

pub fn default_prompts() -> PromptSet {
    PromptSet::new(DEFAULT_THETA_E, DEFAULT_THETA_D, DEFAULT_THETA_A).expect("default prompts are non-empty")
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub deterministic_compare: bool,
}

impl Globals {
    pub fn load_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

/// Accepts either a bare prompt set or a prompt store checkpoint.
pub fn load_prompts(path: &Path) -> Result<PromptSet> {
    let store: PromptStore = read_json(path).with_context(|| format!("reading prompts {}", path.display()))?;
    Ok(store.prompts)
}

pub fn load_index(path: &Path) -> Result<CorpusIndex> {
    read_json(path).with_context(|| format!("reading index {}", path.display()))
}

fn load_examples(path: &Path) -> Result<Vec<Example>> {
    let examples = load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))?;
    if examples.is_empty() {
        bail!("dataset {} is empty", path.display());
    }
    Ok(examples)
}

fn retriever<'a>(cfg: &RunConfig, index: &'a CorpusIndex) -> Result<Box<dyn Retriever + 'a>> {
    Ok(match &cfg.retrieval.external_scores_path {
        Some(path) => Box::new(ExternalRanking::load(index, cfg.resolve(path))?),
        None => Box::new(Bm25Retriever::new(index, cfg.retrieval.bm25()?)),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSummary {
    pub documents: usize,
    pub terms: usize,
}

pub fn cmd_index(globals: &Globals, corpus: &Path, out: &Path) -> Result<IndexSummary> {
    let cfg = globals.load_config()?;
    let docs = load_corpus(corpus).with_context(|| format!("reading corpus {}", corpus.display()))?;
    let index = CorpusIndex::build(docs, cfg.retrieval.tokenizer)?;
    write_json_atomic(out, &index)?;
    let summary = IndexSummary { documents: index.doc_count(), terms: index.term_count() };
    println!("{} documents indexed, {} terms", summary.documents, summary.terms);
    Ok(summary)
}

/// Runs the pipeline over every example on a bounded worker pool; traces
/// come back in dataset order.
pub fn run_traces(cfg: &RunConfig, roles: &RoleSet, index: &CorpusIndex, prompts: &PromptSet, examples: &[Example]) -> Result<Vec<Trace>> {
    let retriever = retriever(cfg, index)?;
    let pcfg = cfg.pipeline_config();
    let pipeline = Pipeline::new(roles, retriever.as_ref(), &pcfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    Ok(pool.install(|| examples.par_iter().map(|ex| pipeline.run(&ex.question, prompts)).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub traces: usize,
    pub failed: usize,
    pub fallback_rate: f64,
}

pub fn cmd_run(globals: &Globals, dataset: &Path, index: &Path, prompts: &Path, out: &Path) -> Result<RunSummary> {
    let cfg = globals.load_config()?;
    let examples = load_examples(dataset)?;
    let index = load_index(index)?;
    let prompts = load_prompts(prompts)?;
    let roles = cfg.build_roles()?;

    let mut traces = run_traces(&cfg, &roles, &index, &prompts, &examples)?;
    if globals.deterministic_compare {
        traces = traces.into_iter().map(Trace::without_timing).collect();
    }
    write_jsonl(out, &traces)?;

    let failed = traces.iter().filter(|t| t.error.is_some()).count();
    let calls: usize = traces.iter().map(|t| t.window_calls).sum();
    let fallbacks: usize = traces.iter().map(|t| t.window_fallbacks).sum();
    let summary = RunSummary {
        traces: traces.len(),
        failed,
        fallback_rate: if calls == 0 { 0.0 } else { fallbacks as f64 / calls as f64 },
    };
    println!(
        "{} traces written to {} ({} failed, window fallback rate {:.4})",
        summary.traces,
        out.display(),
        summary.failed,
        summary.fallback_rate
    );
    Ok(summary)
}

pub fn cmd_train(
    globals: &Globals,
    dataset: &Path,
    index: &Path,
    prompts: &Path,
    out_dir: &Path,
    resume: bool,
) -> Result<TrainOutcome> {
    let cfg = globals.load_config()?;
    let examples = load_examples(dataset)?;
    let index = load_index(index)?;
    let prompts = load_prompts(prompts)?;
    let roles = cfg.build_roles()?;
    let retriever = retriever(&cfg, &index)?;
    let pcfg = cfg.pipeline_config();
    let outcome = Trainer::new(&roles, retriever.as_ref(), &pcfg, &cfg.train).train(&examples, &prompts, out_dir, resume)?;
    println!(
        "{} steps ({} skipped); prompt version {} written to {}",
        outcome.steps_run,
        outcome.skipped,
        outcome.store.prompts.version(),
        out_dir.display()
    );
    Ok(outcome)
}

pub fn cmd_eval(globals: &Globals, traces: &Path, dataset: &Path, options: &EvalOptions) -> Result<EvalReport> {
    let examples = load_examples(dataset)?;
    let traces: Vec<Trace> = read_jsonl(traces).with_context(|| format!("reading traces {}", traces.display()))?;
    let options = EvalOptions { seed: globals.seed.unwrap_or(options.seed), ..options.clone() };
    let report: EvalReport = evaluate(&traces, &examples, &options)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    print!("{}", report.to_table());
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRow {
    pub strategy: RerankStrategy,
    pub report: EvalReport,
}

pub fn compare_table(rows: &[StrategyRow]) -> String {
    let mut out = String::new();
    let ks: Vec<usize> = rows.first().map(|r| r.report.recall_at.keys().copied().collect()).unwrap_or_default();
    let _ = write!(out, "{:<16} {:>8}", "strategy", "EM");
    for k in &ks {
        let _ = write!(out, " {:>8}", format!("Top-{k}"));
    }
    out.push('\n');
    for row in rows {
        let name = serde_json::to_value(row.strategy).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        let _ = write!(out, "{name:<16} {:>8.4}", row.report.em);
        for k in &ks {
            let _ = write!(out, " {:>8.4}", row.report.recall_at[k]);
        }
        out.push('\n');
    }
    out
}

/// Runs the pipeline once per top-k selection strategy and reports EM and
/// recall side by side.
pub fn compare_strategies(
    cfg: &RunConfig,
    roles: &RoleSet,
    index: &CorpusIndex,
    prompts: &PromptSet,
    examples: &[Example],
    options: &EvalOptions,
) -> Result<Vec<StrategyRow>> {
    [RerankStrategy::Sliding, RerankStrategy::RetrievalScore, RerankStrategy::Random]
        .into_iter()
        .map(|strategy| {
            let mut cfg = cfg.clone();
            cfg.pipeline.rerank_strategy = strategy;
            let traces = run_traces(&cfg, roles, index, prompts, examples)?;
            Ok(StrategyRow { strategy, report: evaluate(&traces, examples, options)? })
        })
        .collect()
}

pub fn cmd_compare_rerank(
    globals: &Globals,
    dataset: &Path,
    index: &Path,
    prompts: Option<&Path>,
    options: &EvalOptions,
) -> Result<Vec<StrategyRow>> {
    let cfg = globals.load_config()?;
    let examples = load_examples(dataset)?;
    let index = load_index(index)?;
    let prompts = prompts.map(load_prompts).transpose()?.unwrap_or_else(default_prompts);
    let roles = cfg.build_roles()?;
    let options = EvalOptions { seed: cfg.seed, ..options.clone() };
    let rows = compare_strategies(&cfg, &roles, &index, &prompts, &examples, &options)?;
    print!("{}", compare_table(&rows));
    Ok(rows)
}
