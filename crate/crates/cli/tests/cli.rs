mod common;

use std::process::Command;

use odqa_cli::{cmd_eval, cmd_index, cmd_run, cmd_train, run_traces, Globals};
use odqa_core::config::RunConfig;
use odqa_core::io::{read_jsonl, write_jsonl};
use odqa_core::metrics::EvalOptions;
use odqa_core::pipeline::RerankStrategy;
use odqa_core::prompt_opt::PromptStore;
use odqa_core::types::{Document, Trace};
use serde_json::json;

fn odqa() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_odqa"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn globals(files: &common::Files) -> Globals {
    Globals { config: Some(files.config.clone()), ..Default::default() }
}

#[test]
fn index_reports_document_count() {
    let files = common::topic_files(1, common::mock_config(0));
    let corpus = files.path("five.jsonl");
    let docs: Vec<Document> = common::topic_docs(2).into_iter().take(5).collect();
    common::write_corpus(&corpus, &docs);
    let out = odqa().args(["index", "--corpus"]).arg(&corpus).arg("--out").arg(files.path("i.json")).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("5 documents indexed"));

    let summary = cmd_index(&Globals::default(), &corpus, &files.path("j.json")).unwrap();
    assert_eq!(summary.documents, 5);
}

#[test]
fn index_rejects_malformed_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\",\"text\":\"two\"}\n{\"id\": \"c\", \"text\":\n",
    )
    .unwrap();
    let out = odqa().args(["index", "--corpus"]).arg(&bad).arg("--out").arg(dir.path().join("i.json")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"), "{}", String::from_utf8_lossy(&out.stderr));

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = odqa().args(["index", "--corpus"]).arg(&empty).arg("--out").arg(dir.path().join("i.json")).output().unwrap();
    assert!(!out.status.success());

    let dup = dir.path().join("dup.jsonl");
    std::fs::write(&dup, "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"a\",\"text\":\"two\"}\n").unwrap();
    assert!(cmd_index(&Globals::default(), &dup, &dir.path().join("i.json")).is_err());
}

#[test]
fn run_writes_one_trace_per_question() {
    let files = common::topic_files(3, common::mock_config(2));
    let out = files.path("traces.jsonl");
    let summary = cmd_run(&globals(&files), &files.dataset, &files.index, &files.prompts, &out).unwrap();
    assert_eq!(summary.traces, 3);
    let traces: Vec<Trace> = read_jsonl(&out).unwrap();
    let ids: Vec<&str> = traces.iter().map(|t| t.question_id.as_str()).collect();
    assert_eq!(ids, ["q0", "q1", "q2"]);
    assert!(traces.iter().all(|t| t.timing.len() == 4));
}

#[test]
fn run_setup_failures_exit_nonzero() {
    let files = common::topic_files(3, common::mock_config(2));
    let out = odqa()
        .arg("--config")
        .arg(&files.config)
        .args(["run", "--dataset"])
        .arg(&files.dataset)
        .arg("--index")
        .arg(&files.index)
        .arg("--prompts")
        .arg(files.path("missing.json"))
        .arg("--out")
        .arg(files.path("t.jsonl"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!files.path("t.jsonl").exists());
}

#[test]
fn deterministic_compare_via_binary() {
    let files = common::topic_files(5, common::mock_config(9));
    let run = |name: &str| {
        let path = files.path(name);
        let status = odqa()
            .arg("--config")
            .arg(&files.config)
            .args(["--deterministic-compare", "--workers", "3", "run", "--dataset"])
            .arg(&files.dataset)
            .arg("--index")
            .arg(&files.index)
            .arg("--prompts")
            .arg(&files.prompts)
            .arg("--out")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.jsonl"), run("b.jsonl"));
}

#[test]
fn seed_flag_changes_mock_outputs() {
    let files = common::topic_files(4, common::mock_config(1));
    let base = globals(&files);
    let a = files.path("a.jsonl");
    let b = files.path("b.jsonl");
    cmd_run(&Globals { deterministic_compare: true, ..base.clone() }, &files.dataset, &files.index, &files.prompts, &a).unwrap();
    cmd_run(&Globals { deterministic_compare: true, seed: Some(99), ..base }, &files.dataset, &files.index, &files.prompts, &b)
        .unwrap();
    assert_ne!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

fn train_config(max_examples: Option<usize>) -> serde_json::Value {
    let mut cfg = common::mock_config(4);
    cfg["pipeline"] = json!({"m_expansions": 2, "window": {"w": 3, "l": 1}});
    cfg["train"] = json!({"max_examples": max_examples});
    cfg
}

#[test]
fn train_checkpoints_and_versions() {
    let files = common::topic_files(2, train_config(None));
    let out = files.path("train");
    let outcome = cmd_train(&globals(&files), &files.dataset, &files.index, &files.prompts, &out, false).unwrap();
    assert_eq!(outcome.store.prompts.version(), 2);
    assert!(out.join("checkpoints/step_0001.json").exists());
    assert!(out.join("checkpoints/step_0002.json").exists());
    let final_store = PromptStore::load(&out.join("prompt_store.json")).unwrap();
    assert_eq!(final_store.history.len(), 2);
    assert_eq!(final_store.history[1].version, 2);
    let lines = std::fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
}

#[test]
fn train_resume_matches_uninterrupted() {
    let full = common::topic_files(3, train_config(None));
    let a = cmd_train(&globals(&full), &full.dataset, &full.index, &full.prompts, &full.path("out"), false).unwrap();

    let partial = common::topic_files(3, train_config(Some(1)));
    let out = partial.path("out");
    cmd_train(&globals(&partial), &partial.dataset, &partial.index, &partial.prompts, &out, false).unwrap();
    std::fs::write(&partial.config, serde_json::to_string(&train_config(None)).unwrap()).unwrap();
    let b = cmd_train(&globals(&partial), &partial.dataset, &partial.index, &partial.prompts, &out, true).unwrap();
    assert_eq!(b.steps_run, 2);
    assert_eq!(a.store, b.store);
}

#[test]
fn zero_max_examples_rejected() {
    let files = common::topic_files(2, train_config(Some(0)));
    let err = cmd_train(&globals(&files), &files.dataset, &files.index, &files.prompts, &files.path("o"), false).unwrap_err();
    assert!(format!("{err:#}").contains("max_examples"));
    assert!(!files.path("o").exists());
}

fn doc(id: &str, text: &str) -> Document {
    Document::new(id, "", text).unwrap()
}

#[test]
fn eval_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("d.jsonl");
    write_jsonl(
        &dataset,
        &[json!({"id": "a", "question": "when?", "answers": ["1989"]}), json!({"id": "b", "question": "where?", "answers": ["Paris"]})],
    )
    .unwrap();
    let mut ta = Trace::empty("a", 0);
    ta.answer = "1989".into();
    ta.reranked = vec![doc("x", "nothing here"), doc("y", "won in 1989")];
    let mut tb = Trace::empty("b", 0);
    tb.answer = "London".into();
    tb.reranked = vec![doc("x", "nothing"), doc("y", "still nothing"), doc("z", "the city of Paris")];
    let traces = dir.path().join("t.jsonl");
    write_jsonl(&traces, &[ta, tb]).unwrap();

    let report = cmd_eval(&Globals::default(), &traces, &dataset, &EvalOptions::default()).unwrap();
    assert_eq!(report.em, 0.5);
    assert_eq!(report.recall_at.keys().copied().collect::<Vec<_>>(), [2, 4, 8]);
    assert_eq!(report.recall_at.values().copied().collect::<Vec<_>>(), [0.5, 1.0, 1.0]);
    assert_eq!(report.to_table().lines().next().unwrap().matches("Top-").count(), 3);

    let mut stray = Trace::empty("zzz", 0);
    stray.answer = "x".into();
    write_jsonl(&traces, &[stray]).unwrap();
    let out = odqa().args(["eval", "--traces"]).arg(&traces).arg("--dataset").arg(&dataset).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn baseline_strategies() {
    let files = common::topic_files(6, common::mock_config(3));
    let mut cfg = RunConfig::load(&files.config).unwrap();
    let roles = cfg.build_roles().unwrap();
    let index = common::topic_index(6);
    let examples = common::topic_examples(6);
    let prompts = odqa_cli::default_prompts();

    cfg.pipeline.rerank_strategy = RerankStrategy::RetrievalScore;
    for t in run_traces(&cfg, &roles, &index, &prompts, &examples).unwrap() {
        let k = cfg.pipeline.window.k().min(t.retrieved.len());
        let ids = |d: &[Document]| d.iter().map(|d| d.doc_id().to_owned()).collect::<Vec<_>>();
        assert_eq!(ids(&t.reranked), ids(&t.retrieved[..k]));
    }

    cfg.pipeline.rerank_strategy = RerankStrategy::Random;
    let a = run_traces(&cfg, &roles, &index, &prompts, &examples).unwrap();
    let b = run_traces(&cfg, &roles, &index, &prompts, &examples).unwrap();
    let strip = |v: Vec<Trace>| v.into_iter().map(|t| serde_json::to_string(&t.without_timing()).unwrap()).collect::<Vec<_>>();
    assert_eq!(strip(a), strip(b));
}

#[test]
fn compare_rerank_prints_three_rows() {
    let files = common::topic_files(4, common::mock_config(3));
    let out = odqa()
        .arg("--config")
        .arg(&files.config)
        .args(["compare-rerank", "--dataset"])
        .arg(&files.dataset)
        .arg("--index")
        .arg(&files.index)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["sliding", "retrieval_score", "random"] {
        assert!(stdout.contains(name), "{stdout}");
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 2);
}
