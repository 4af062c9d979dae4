#![allow(dead_code)]

use std::path::{Path, PathBuf};

use odqa_core::dataset::{DatasetRecord, Example};
use odqa_core::io::{write_json_atomic, write_jsonl};
use odqa_core::retrieval::{CorpusIndex, TokenizerConfig};
use odqa_core::types::{Document, GoldAnswers, Question};
use serde_json::json;

pub fn topic_docs(topics: usize) -> Vec<Document> {
    (0..topics)
        .flat_map(|i| {
            let name = format!("topic{i}");
            [
                (format!("t{i}a"), format!("The {name} festival was first held in {}.", 1900 + i)),
                (format!("t{i}b"), format!("{name} is a town known for its market and river.")),
                (format!("t{i}c"), format!("Visitors to {name} often arrive by train in summer.")),
            ]
        })
        .map(|(id, text)| Document::new(id, "", text).unwrap())
        .collect()
}

pub fn topic_examples(topics: usize) -> Vec<Example> {
    (0..topics)
        .map(|i| Example {
            question: Question::new(format!("q{i}"), format!("In which year was the topic{i} festival first held?")).unwrap(),
            gold: GoldAnswers::new([format!("{}", 1900 + i)]).unwrap(),
        })
        .collect()
}

pub fn topic_index(topics: usize) -> CorpusIndex {
    CorpusIndex::build(topic_docs(topics), TokenizerConfig::default()).unwrap()
}

pub struct Files {
    pub dir: tempfile::TempDir,
    pub corpus: PathBuf,
    pub dataset: PathBuf,
    pub index: PathBuf,
    pub prompts: PathBuf,
    pub config: PathBuf,
}

impl Files {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn write_corpus(path: &Path, docs: &[Document]) {
    let rows: Vec<_> = docs.iter().map(|d| json!({"id": d.doc_id(), "title": d.title(), "text": d.text()})).collect();
    write_jsonl(path, &rows).unwrap();
}

pub fn write_dataset(path: &Path, examples: &[Example]) {
    let rows: Vec<DatasetRecord> = examples.iter().map(DatasetRecord::from).collect();
    write_jsonl(path, &rows).unwrap();
}

/// Corpus, dataset, index, prompts and a mock-backed config on disk.
pub fn topic_files(topics: usize, config: serde_json::Value) -> Files {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let dataset = dir.path().join("dataset.jsonl");
    let index = dir.path().join("index.json");
    let prompts = dir.path().join("prompts.json");
    let config_path = dir.path().join("run.json");
    write_corpus(&corpus, &topic_docs(topics));
    write_dataset(&dataset, &topic_examples(topics));
    write_json_atomic(&index, &topic_index(topics)).unwrap();
    write_json_atomic(&prompts, &odqa_cli::default_prompts()).unwrap();
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    Files { dir, corpus, dataset, index, prompts, config: config_path }
}

pub fn mock_config(seed: u64) -> serde_json::Value {
    json!({
        "seed": seed,
        "workers": 4,
        "retrieval": {"n": 6},
        "pipeline": {"m_expansions": 3, "window": {"w": 4, "l": 2}, "rerank_candidates": 2},
        "backends": {"mock": {"kind": "mock", "seed": seed}},
        "roles": {"default_backend": "mock"}
    })
}

/// FNV-1a, used to derive tabled scores independently of the library.
pub fn fnv(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
