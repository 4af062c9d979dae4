use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::io::{append_jsonl, read_json, write_atomic, write_json_atomic};
use crate::types::PromptSet;

use super::{StepReport, Trainer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub version: u64,
    pub step_report_ref: String,
}

/// Versioned prompt triple plus training progress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStore {
    #[serde(flatten)]
    pub prompts: PromptSet,
    #[serde(default)]
    pub history: Vec<HistoryEntry>,
    #[serde(default)]
    pub examples_processed: usize,
}

impl PromptStore {
    pub fn new(prompts: PromptSet) -> Self {
        PromptStore { prompts, history: Vec::new(), examples_processed: 0 }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_atomic(path, self)
    }

    /// Applies one step's outcome.
    pub fn record(&mut self, prompts: PromptSet, report_ref: String) {
        if prompts.version() != self.prompts.version() {
            self.history.push(HistoryEntry { version: prompts.version(), step_report_ref: report_ref });
        }
        self.prompts = prompts;
        self.examples_processed += 1;
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub store: PromptStore,
    pub steps_run: usize,
    pub skipped: usize,
    pub log_path: PathBuf,
}

pub const STORE_FILE: &str = "prompt_store.json";
pub const LOG_FILE: &str = "train_log.jsonl";
pub const FINAL_FILE: &str = "final_prompts.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

fn truncate_lines(path: &Path, keep: usize) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut kept = String::new();
    for line in BufReader::new(file).lines().take(keep) {
        kept.push_str(&line.map_err(|e| Error::io(path, e))?);
        kept.push('\n');
    }
    write_atomic(path, kept.as_bytes())
}

impl Trainer<'_> {
    /// Folds [`Trainer::train_step`] over `dataset` in order, writing the
    /// log line then the checkpoint after each step. With `resume`, picks
    /// up from `out_dir`'s checkpoint when one exists.
    pub fn train(&self, dataset: &[Example], initial: &PromptSet, out_dir: &Path, resume: bool) -> Result<TrainOutcome> {
        self.config.validate()?;
        if dataset.is_empty() {
            return Err(Error::invalid("dataset", "no training examples"));
        }
        let store_path = out_dir.join(STORE_FILE);
        let log_path = out_dir.join(LOG_FILE);
        let ckpt_dir = out_dir.join(CHECKPOINT_DIR);
        fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;

        let mut store = if resume && store_path.exists() {
            let store = PromptStore::load(&store_path)?;
            truncate_lines(&log_path, store.examples_processed)?;
            tracing::info!(examples_processed = store.examples_processed, "resuming training");
            store
        } else {
            if log_path.exists() {
                fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
            }
            PromptStore::new(initial.clone())
        };

        let limit = self.config.max_examples.unwrap_or(dataset.len()).min(dataset.len());
        let mut steps_run = 0;
        let mut skipped = 0;
        for (step, example) in dataset.iter().enumerate().take(limit).skip(store.examples_processed) {
            let (next, report): (PromptSet, StepReport) = self.train_step(example, &store.prompts, step);
            if report.skipped.is_some() {
                skipped += 1;
            }
            append_jsonl(&log_path, &report)?;
            store.record(next, format!("{LOG_FILE}#{}", step + 1));
            store.save(&ckpt_dir.join(format!("step_{:04}.json", step + 1)))?;
            store.save(&store_path)?;
            steps_run += 1;
            tracing::info!(step, question = example.question.id(), version = store.prompts.version(), "training step done");
        }
        write_json_atomic(&out_dir.join(FINAL_FILE), &store.prompts)?;
        Ok(TrainOutcome { store, steps_run, skipped, log_path })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_jsonl;
    use crate::pipeline::PipelineConfig;
    use crate::prompt_opt::TrainConfig;
    use crate::rerank::WindowConfig;
    use crate::retrieval::{Bm25Params, Bm25Retriever, CorpusIndex, TokenizerConfig};
    use crate::roles::{MockBackend, RoleSet};
    use crate::types::{Document, GoldAnswers, Question};
    use std::sync::Arc;

    fn dataset(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example {
                question: Question::new(format!("q{i}"), format!("which passage mentions polveir {i}")).unwrap(),
                gold: GoldAnswers::new([format!("{i}")]).unwrap(),
            })
            .collect()
    }

    fn index() -> CorpusIndex {
        let docs = (0..6).map(|i| Document::new(format!("d{i}"), "", format!("polveir passage {i}")).unwrap());
        CorpusIndex::build(docs, TokenizerConfig::default()).unwrap()
    }

    fn run(dir: &Path, data: &[Example], train: TrainConfig, resume: bool) -> TrainOutcome {
        let idx = index();
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(4)));
        let p = PipelineConfig { n_retrieve: 5, window: WindowConfig::new(3, 1).unwrap(), ..Default::default() };
        let initial = PromptSet::new("E", "D", "A").unwrap();
        Trainer::new(&roles, &retriever, &p, &train).train(data, &initial, dir, resume).unwrap()
    }

    #[test]
    fn store_json_shape() {
        let store = PromptStore::new(PromptSet::new("e", "d", "a").unwrap());
        let v = serde_json::to_value(&store).unwrap();
        for key in ["version", "theta_e", "theta_d", "theta_a", "history"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: PromptStore = serde_json::from_value(v).unwrap();
        assert_eq!(back, store);
        let bare: PromptStore =
            serde_json::from_str(r#"{"version":3,"theta_e":"e","theta_d":"d","theta_a":"a"}"#).unwrap();
        assert_eq!(bare.prompts.version(), 3);
    }

    #[test]
    fn two_steps_two_versions() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(dir.path(), &dataset(2), TrainConfig::default(), false);
        assert_eq!(out.store.prompts.version(), 2);
        assert_eq!(out.steps_run, 2);
        assert_eq!(out.store.history.len(), 2);
        assert!(dir.path().join("checkpoints/step_0001.json").exists());
        assert!(dir.path().join("checkpoints/step_0002.json").exists());
        let reports: Vec<StepReport> = read_jsonl(&out.log_path).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(StepReport::is_consistent));
    }

    #[test]
    fn max_examples_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(dir.path(), &dataset(10), TrainConfig { max_examples: Some(1), ..Default::default() }, false);
        assert_eq!(out.steps_run, 1);
        assert_eq!(out.store.prompts.version(), 1);
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let data = dataset(3);
        let full = tempfile::tempdir().unwrap();
        let a = run(full.path(), &data, TrainConfig::default(), false);

        let cut = tempfile::tempdir().unwrap();
        run(cut.path(), &data, TrainConfig { max_examples: Some(1), ..Default::default() }, false);
        let b = run(cut.path(), &data, TrainConfig::default(), true);
        assert_eq!(b.steps_run, 2);
        assert_eq!(a.store, b.store);
        assert_eq!(
            fs::read_to_string(&a.log_path).unwrap(),
            fs::read_to_string(&b.log_path).unwrap()
        );
    }
}
