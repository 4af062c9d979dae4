use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::pipeline::{assemble_evidence, derive_seed, Pipeline, PipelineConfig};
use crate::rerank::sliding_window_rerank;
use crate::retrieval::Retriever;
use crate::roles::render::render_gold;
use crate::roles::{field, RoleSet};
use crate::scalar::argmax_first;
use crate::types::{Document, EvidenceItem, Expansion, GoldAnswers, PromptSet, Question};

use super::{
    PosteriorDocCandidate, PosteriorExpansionCandidate, PosteriorGrid, PriorReport, PromptKind, PromptSelection,
    StepReport, TrainConfig,
};

/// Forward pass under the current prompts, one sample per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorOutputs {
    pub expansion: Expansion,
    /// Every retrieved document in reranked order.
    pub full_order: Vec<Document>,
    /// Top-k of `full_order`.
    pub docs: Vec<Document>,
    pub answer: String,
    pub evidence: Vec<EvidenceItem>,
}

pub struct Trainer<'a> {
    pub roles: &'a RoleSet,
    pub retriever: &'a dyn Retriever,
    pub pipeline: &'a PipelineConfig,
    pub config: &'a TrainConfig,
}

impl<'a> Trainer<'a> {
    pub fn new(
        roles: &'a RoleSet,
        retriever: &'a dyn Retriever,
        pipeline: &'a PipelineConfig,
        config: &'a TrainConfig,
    ) -> Self {
        Trainer { roles, retriever, pipeline, config }
    }

    fn seed(&self, q: &Question, label: &str) -> u64 {
        derive_seed(self.pipeline.random_seed, &format!("train/{}/{label}", q.id()))
    }

    pub fn forward_priors(&self, q: &Question, prompts: &PromptSet) -> Result<PriorOutputs> {
        let pipeline = Pipeline::new(self.roles, self.retriever, self.pipeline);
        let sampled = self.roles.generate_expansions(q, prompts.theta_e(), 1, self.seed(q, "prior/e"), prompts.version())?;
        let expansion = sampled
            .expansions
            .into_iter()
            .next()
            .ok_or_else(|| Error::stage("expansion", "prior expansion was empty"))?;
        let retrieved = pipeline.retrieve(q, &expansion)?;
        let full_order = if retrieved.is_empty() {
            Vec::new()
        } else {
            sliding_window_rerank(
                &retrieved,
                q,
                &expansion,
                prompts.theta_d(),
                self.pipeline.window,
                self.roles,
                self.seed(q, "prior/d"),
            )?
            .full_order
        };
        let docs = full_order[..self.pipeline.window.k().min(full_order.len())].to_vec();
        let evidence =
            assemble_evidence(&expansion, &docs, self.pipeline.insertion_location, self.seed(q, "prior/evidence"));
        let texts: Vec<&str> = evidence.iter().map(EvidenceItem::text).collect();
        let answer = self.roles.generate_answer(q, &texts, prompts.theta_a(), self.seed(q, "prior/a"))?;
        Ok(PriorOutputs { expansion, full_order, docs, answer, evidence })
    }

    /// Swaps the prior list's last document for each of the next
    /// `n_doc_posteriors` documents of the reranked order.
    pub fn sample_doc_posteriors(
        &self,
        q: &Question,
        gold: &GoldAnswers,
        prior: &PriorOutputs,
        warnings: &mut Vec<String>,
    ) -> (Vec<PosteriorDocCandidate>, usize) {
        let k = prior.docs.len();
        let surplus = prior.full_order.len().saturating_sub(k);
        let lists: Vec<(Vec<Document>, Option<usize>)> = if k == 0 || surplus == 0 {
            vec![(prior.docs.clone(), None)]
        } else {
            (1..=self.config.n_doc_posteriors.min(surplus))
                .map(|i| {
                    let src = k - 1 + i;
                    let mut docs = prior.docs[..k - 1].to_vec();
                    docs.push(prior.full_order[src].clone());
                    (crate::types::reindex(docs), Some(src))
                })
                .collect()
        };
        let candidates: Vec<PosteriorDocCandidate> = lists
            .into_iter()
            .enumerate()
            .map(|(i, (docs, src))| {
                let seed = self.seed(q, &format!("post/d/{i}"));
                let s_d = self.roles.score_reranking(&docs, q, &prior.expansion, None, None, seed);
                let s_a = self.roles.score_answer(gold, q, &prior.expansion, &docs, None, seed);
                warnings.extend(s_d.warning.into_iter().chain(s_a.warning));
                PosteriorDocCandidate::new(docs, src, s_d.score, s_a.score)
            })
            .collect();
        let best = argmax_first(&candidates.iter().map(|c| c.v_d).collect::<Vec<_>>()).unwrap_or(0);
        (candidates, best)
    }

    pub fn sample_expansion_posteriors(
        &self,
        q: &Question,
        gold: &GoldAnswers,
        prior: &PriorOutputs,
        best_docs: &[Document],
        warnings: &mut Vec<String>,
    ) -> Result<(Vec<PosteriorExpansionCandidate>, usize)> {
        let sampled = self.roles.posterior_expansions(
            q,
            &prior.expansion,
            best_docs,
            gold,
            self.config.m_exp_posteriors,
            self.seed(q, "post/e"),
        )?;
        warnings.extend(sampled.warnings);
        let mut expansions = sampled.expansions;
        if expansions.is_empty() {
            let msg = "no usable posterior expansion; using the prior".to_owned();
            tracing::warn!(question = q.id(), "{msg}");
            warnings.push(msg);
            expansions.push(prior.expansion.clone());
        }
        let candidates: Vec<PosteriorExpansionCandidate> = expansions
            .into_iter()
            .enumerate()
            .map(|(j, e)| {
                let seed = self.seed(q, &format!("post/e/{j}"));
                let s_e = self.roles.score_expansion(&e, q, None, None, seed);
                let s_d = self.roles.score_reranking(best_docs, q, &e, None, None, seed);
                let s_a = self.roles.score_answer(gold, q, &e, best_docs, None, seed);
                warnings.extend(s_e.warning.into_iter().chain(s_d.warning).chain(s_a.warning));
                PosteriorExpansionCandidate::new(e, s_e.score, s_d.score, s_a.score)
            })
            .collect();
        let best = argmax_first(&candidates.iter().map(|c| c.v_e).collect::<Vec<_>>()).unwrap_or(0);
        Ok((candidates, best))
    }

    /// Rewrites `current` through the updater role; the incumbent is
    /// appended when configured and is the only candidate on failure.
    pub fn propose_prompts(
        &self,
        kind: PromptKind,
        current: &str,
        q: &Question,
        target: String,
        prior: Vec<(&'static str, String)>,
        warnings: &mut Vec<String>,
    ) -> (Vec<String>, Option<usize>) {
        let instructions = self.roles.instructions();
        let instruction = match kind {
            PromptKind::Answer => &instructions.update_answer,
            PromptKind::Rerank => &instructions.update_rerank,
            PromptKind::Expand => &instructions.update_expand,
        };
        let mut context = vec![
            (field::TARGET_KIND, kind.as_str().to_owned()),
            (field::CURRENT_PROMPT, current.to_owned()),
            (field::QUESTION, q.text().to_owned()),
            (field::TARGET, target),
        ];
        context.extend(prior);
        let seed = self.seed(q, &format!("propose/{}", kind.as_str()));
        match self.roles.propose_prompts(instruction, context, self.config.k_prompt_candidates, seed) {
            Ok(mut proposed) => {
                proposed.truncate(self.config.k_prompt_candidates);
                if self.config.include_incumbent || proposed.is_empty() {
                    proposed.push(current.to_owned());
                    let at = proposed.len() - 1;
                    (proposed, Some(at))
                } else {
                    (proposed, None)
                }
            }
            Err(err) => {
                let msg = format!("{} prompt proposal failed: {err}; keeping the incumbent", kind.as_str());
                tracing::warn!("{msg}");
                warnings.push(msg);
                (vec![current.to_owned()], Some(0))
            }
        }
    }

    /// Scores every candidate over the posterior grid and keeps the argmax
    /// of the weighted log objective.
    pub fn select_prompt(
        &self,
        kind: PromptKind,
        candidates: Vec<String>,
        incumbent_index: Option<usize>,
        grid: &PosteriorGrid,
        q: &Question,
        gold: &GoldAnswers,
    ) -> PromptSelection {
        let cells = grid.cells(kind);
        let mut warnings = Vec::new();
        let cell_scores: Vec<Vec<f64>> = candidates
            .iter()
            .enumerate()
            .map(|(c, prompt)| {
                cells
                    .iter()
                    .map(|&(i, j)| {
                        let e = &grid.expansions[j].expansion;
                        let seed = self.seed(q, &format!("select/{}/{c}/{}/{j}", kind.as_str(), i.unwrap_or(0)));
                        let out = match (kind, i) {
                            (PromptKind::Expand, _) => self.roles.score_expansion(e, q, Some(prompt), None, seed),
                            (PromptKind::Rerank, Some(i)) => {
                                self.roles.score_reranking(&grid.docs[i].docs, q, e, Some(prompt), None, seed)
                            }
                            (PromptKind::Answer, Some(i)) => {
                                self.roles.score_answer(gold, q, e, &grid.docs[i].docs, Some(prompt), seed)
                            }
                            _ => unreachable!("document cells always carry a doc index"),
                        };
                        warnings.extend(out.warning);
                        out.score.value()
                    })
                    .collect()
            })
            .collect();
        let mut selection = PromptSelection::from_scores(
            kind,
            candidates,
            grid.weights(kind),
            cell_scores,
            self.config.epsilon_log_floor,
            incumbent_index,
        );
        selection.warnings = warnings;
        selection
    }

    /// One full update on one example. Stage errors leave the prompts
    /// unchanged and mark the report as skipped.
    pub fn train_step(&self, example: &Example, prompts: &PromptSet, step: usize) -> (PromptSet, StepReport) {
        let mut report = StepReport::new(step, example.question.id(), prompts.version());
        match self.try_step(example, prompts, &mut report) {
            Ok(next) => {
                report.version_after = next.version();
                (next, report)
            }
            Err(err) => {
                tracing::warn!(question = example.question.id(), error = %err, "skipping training example");
                report.skipped = Some(err.to_string());
                (prompts.clone(), report)
            }
        }
    }

    fn try_step(&self, example: &Example, prompts: &PromptSet, report: &mut StepReport) -> Result<PromptSet> {
        let (q, gold) = (&example.question, &example.gold);
        let prior = self.forward_priors(q, prompts)?;
        report.prior = Some(PriorReport {
            expansion: prior.expansion.text().to_owned(),
            doc_ids: prior.docs.iter().map(|d| d.doc_id().to_owned()).collect(),
            answer: prior.answer.clone(),
        });

        let mut warnings = Vec::new();
        let (doc_posteriors, best_doc) = self.sample_doc_posteriors(q, gold, &prior, &mut warnings);
        let best_docs = doc_posteriors[best_doc].docs.clone();
        let (exp_posteriors, best_exp) = self.sample_expansion_posteriors(q, gold, &prior, &best_docs, &mut warnings)?;
        let best_expansion = exp_posteriors[best_exp].expansion.clone();
        report.best_doc = Some(best_doc);
        report.best_expansion = Some(best_exp);
        let grid = PosteriorGrid { docs: doc_posteriors, expansions: exp_posteriors };

        let rendered_prior_docs = self.roles.render_docs(&prior.docs);
        let updates = [
            (
                PromptKind::Answer,
                prompts.theta_a(),
                render_gold(gold),
                vec![
                    (field::PRIOR_EXPANSION, prior.expansion.text().to_owned()),
                    (field::PRIOR_DOCUMENTS, rendered_prior_docs.clone()),
                    (field::PRIOR_ANSWER, prior.answer.clone()),
                ],
            ),
            (
                PromptKind::Rerank,
                prompts.theta_d(),
                self.roles.render_docs(&best_docs),
                vec![
                    (field::PRIOR_EXPANSION, prior.expansion.text().to_owned()),
                    (field::PRIOR_DOCUMENTS, rendered_prior_docs),
                ],
            ),
            (
                PromptKind::Expand,
                prompts.theta_e(),
                best_expansion.text().to_owned(),
                vec![(field::PRIOR_EXPANSION, prior.expansion.text().to_owned())],
            ),
        ];
        for (kind, current, target, prior_fields) in updates {
            let (candidates, incumbent) = self.propose_prompts(kind, current, q, target, prior_fields, &mut warnings);
            let selection = self.select_prompt(kind, candidates, incumbent, &grid, q, gold);
            warnings.extend(selection.warnings.iter().cloned());
            report.selections.push(selection);
        }
        report.doc_posteriors = grid.docs;
        report.expansion_posteriors = grid.expansions;
        report.warnings = warnings;

        let pick = |kind| report.selection(kind).map(|s| s.selected().to_owned()).unwrap_or_default();
        prompts.next_version(pick(PromptKind::Expand), pick(PromptKind::Rerank), pick(PromptKind::Answer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rerank::WindowConfig;
    use crate::retrieval::{Bm25Params, Bm25Retriever, CorpusIndex, TokenizerConfig};
    use crate::roles::{BackendError, FnBackend, MockBackend, RoleKind, RoleRequest};
    use std::sync::Arc;

    fn corpus(n: usize) -> CorpusIndex {
        let docs = (1..=n).map(|i| Document::new(format!("d{i}"), "", format!("polveir passage number {i}")).unwrap());
        CorpusIndex::build(docs, TokenizerConfig::default()).unwrap()
    }

    fn example() -> Example {
        Example {
            question: Question::new("q1", "when did little polveir win").unwrap(),
            gold: GoldAnswers::new(["1989"]).unwrap(),
        }
    }

    fn prompts() -> PromptSet {
        PromptSet::new("E0", "D0", "A0").unwrap()
    }

    fn pcfg() -> PipelineConfig {
        PipelineConfig { n_retrieve: 5, window: WindowConfig::new(3, 1).unwrap(), ..Default::default() }
    }

    /// Evaluator scores read from the request context; everything else mocked.
    fn tabled(score: impl Fn(&RoleRequest) -> Option<f64> + Send + Sync + 'static) -> Arc<FnBackend> {
        let mock = MockBackend::new(5);
        Arc::new(FnBackend::new("tabled", move |req: &RoleRequest| {
            if req.role_kind.is_evaluator() {
                if let Some(v) = score(req) {
                    return Ok(vec![format!("{v}")]);
                }
            }
            crate::roles::Backend::complete(&mock, req)
        }))
    }

    #[test]
    fn prior_has_k_docs_and_full_order() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(1).with_default_answer("  1989 \n")));
        let (p, t) = (pcfg(), TrainConfig::default());
        let prior = Trainer::new(&roles, &retriever, &p, &t).forward_priors(&example().question, &prompts()).unwrap();
        assert_eq!(prior.docs.len(), 2);
        assert_eq!(prior.full_order.len(), 5);
        assert_eq!(prior.answer, "1989");
    }

    #[test]
    fn doc_posteriors_products_and_argmax() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(1)));
        let (p, t) = (pcfg(), TrainConfig::default());
        let trainer = Trainer::new(&roles, &retriever, &p, &t);
        let ex = example();
        let prior = trainer.forward_priors(&ex.question, &prompts()).unwrap();
        let (cands, best) = trainer.sample_doc_posteriors(&ex.question, &ex.gold, &prior, &mut Vec::new());
        assert_eq!(cands.len(), 2);
        for (i, c) in cands.iter().enumerate() {
            assert_eq!(c.docs[0].doc_id(), prior.docs[0].doc_id());
            assert_eq!(c.docs[1].doc_id(), prior.full_order[2 + i].doc_id());
            assert_eq!(c.swapped_in_rank, Some(2 + i));
            assert!((c.v_d - c.s_d.value() * c.s_a.value()).abs() <= 1e-12);
        }
        let v: Vec<f64> = cands.iter().map(|c| c.v_d).collect();
        assert_eq!(Some(best), argmax_first(&v));
    }

    #[test]
    fn doc_posteriors_scripted_scores() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let score_of = |pairs: [(f64, f64); 2]| {
            tabled(move |req: &RoleRequest| {
                let docs = req.field(field::DOCUMENTS)?;
                let i = if docs.contains("number 3") { 0 } else if docs.contains("number 4") { 1 } else { return Some(0.5) };
                match req.role_kind {
                    RoleKind::ScoreReranking => Some(pairs[i].0),
                    RoleKind::ScoreAnswer => Some(pairs[i].1),
                    _ => None,
                }
            })
        };
        // identity window ranker keeps retrieval order d1..d5 under equal scores
        let run = |pairs| {
            let roles = RoleSet::uniform(score_of(pairs))
                .bind(RoleKind::RankWindow, Arc::new(FnBackend::new("id", |_| Ok(vec!["[1] > [2] > [3]".into()]))));
            let (p, t) = (pcfg(), TrainConfig::default());
            let trainer = Trainer::new(&roles, &retriever, &p, &t);
            let ex = example();
            let prior = trainer.forward_priors(&ex.question, &prompts()).unwrap();
            let ids: Vec<&str> = prior.full_order.iter().map(Document::doc_id).collect();
            assert_eq!(ids, ["d1", "d2", "d3", "d4", "d5"]);
            let (c, best) = trainer.sample_doc_posteriors(&ex.question, &ex.gold, &prior, &mut Vec::new());
            (c.iter().map(|c| c.v_d).collect::<Vec<_>>(), best)
        };
        let (v, best) = run([(0.9, 0.5), (0.4, 0.8)]);
        assert!((v[0] - 0.45).abs() < 1e-12 && (v[1] - 0.32).abs() < 1e-12);
        assert_eq!(best, 0);
        let (_, best) = run([(0.5, 0.8), (0.8, 0.5)]);
        assert_eq!(best, 0);
    }

    #[test]
    fn no_surplus_gives_prior_only() {
        let idx = corpus(2);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(1)));
        let (p, t) = (pcfg(), TrainConfig::default());
        let trainer = Trainer::new(&roles, &retriever, &p, &t);
        let ex = example();
        let prior = trainer.forward_priors(&ex.question, &prompts()).unwrap();
        let (c, best) = trainer.sample_doc_posteriors(&ex.question, &ex.gold, &prior, &mut Vec::new());
        assert_eq!(c.len(), 1);
        assert_eq!(best, 0);
        assert_eq!(c[0].docs, prior.docs);
        assert_eq!(c[0].swapped_in_rank, None);
    }

    #[test]
    fn expansion_posteriors_scripted() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let table = |cand: &str| if cand.contains("first") { (0.9, 0.9, 0.9) } else { (1.0, 1.0, 0.7) };
        let backend = tabled(move |req: &RoleRequest| {
            let text = req.field(field::CANDIDATE).or_else(|| req.field(field::EXPANSION))?;
            let (e, d, a) = table(text);
            Some(match req.role_kind {
                RoleKind::ScoreExpansion => e,
                RoleKind::ScoreReranking => d,
                _ => a,
            })
        });
        let posterior = Arc::new(FnBackend::new("post", |req: &RoleRequest| {
            Ok(if req.field(field::PRIOR_EXPANSION).is_some() {
                vec!["first edit".into(), "second edit".into()]
            } else {
                vec!["prior background".into()]
            })
        }));
        let roles = RoleSet::uniform(backend).bind(RoleKind::Expand, posterior);
        let (p, t) = (pcfg(), TrainConfig::default());
        let trainer = Trainer::new(&roles, &retriever, &p, &t);
        let ex = example();
        let prior = trainer.forward_priors(&ex.question, &prompts()).unwrap();
        let (c, best) =
            trainer.sample_expansion_posteriors(&ex.question, &ex.gold, &prior, &prior.docs, &mut Vec::new()).unwrap();
        assert!((c[0].v_e - 0.729).abs() < 1e-12);
        assert!((c[1].v_e - 0.7).abs() < 1e-12);
        assert_eq!(best, 0);
    }

    #[test]
    fn proposals_incumbent_and_failure() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let q = example().question;
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(1)))
            .bind(RoleKind::ProposePrompt, Arc::new(FnBackend::new("p", |_| Ok(vec!["R1".into(), "R2".into()]))));
        let p = pcfg();
        let t = TrainConfig::default();
        let trainer = Trainer::new(&roles, &retriever, &p, &t);
        let (c, inc) = trainer.propose_prompts(PromptKind::Answer, "A0", &q, "1989".into(), vec![], &mut Vec::new());
        assert_eq!(c, ["R1", "R2", "A0"]);
        assert_eq!(inc, Some(2));

        let t = TrainConfig { include_incumbent: false, k_prompt_candidates: 1, ..Default::default() };
        let trainer = Trainer::new(&roles, &retriever, &p, &t);
        let (c, inc) = trainer.propose_prompts(PromptKind::Answer, "A0", &q, "1989".into(), vec![], &mut Vec::new());
        assert_eq!(c, ["R1"]);
        assert_eq!(inc, None);

        let roles = RoleSet::uniform(Arc::new(MockBackend::new(1))).bind(
            RoleKind::ProposePrompt,
            Arc::new(FnBackend::new("down", |_| Err(BackendError::Transport("refused".into())))),
        );
        let roles = roles.with_max_retries(0, std::time::Duration::ZERO);
        let t = TrainConfig::default();
        let trainer = Trainer::new(&roles, &retriever, &p, &t);
        let mut warnings = Vec::new();
        let (c, _) = trainer.propose_prompts(PromptKind::Expand, "E0", &q, "x".into(), vec![], &mut warnings);
        assert_eq!(c, ["E0"]);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn step_with_mock_is_consistent() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(9)));
        let (p, t) = (pcfg(), TrainConfig::default());
        let (next, report) = Trainer::new(&roles, &retriever, &p, &t).train_step(&example(), &prompts(), 0);
        assert!(report.skipped.is_none(), "{report:?}");
        assert_eq!(next.version(), 1);
        assert_eq!(report.version_after, 1);
        assert_eq!(report.selections.len(), 3);
        assert!(report.is_consistent());
        for s in &report.selections {
            assert_eq!(s.candidates.len(), 3);
            let inc = s.incumbent_index.unwrap();
            assert!(s.objectives[s.best_index] >= s.objectives[inc]);
        }
    }

    #[test]
    fn incumbent_dominates_when_proposals_score_worse() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let backend = tabled(|req: &RoleRequest| {
            let p = req
                .field(field::ANSWER_PROMPT)
                .or_else(|| req.field(field::RERANKER_PROMPT))
                .or_else(|| req.field(field::GENERATOR_PROMPT));
            Some(match p {
                Some(p) if p.ends_with('0') => 0.9,
                Some(_) => 0.1,
                None => 0.5,
            })
        });
        let roles = RoleSet::uniform(backend);
        let (p, t) = (pcfg(), TrainConfig::default());
        let (next, _) = Trainer::new(&roles, &retriever, &p, &t).train_step(&example(), &prompts(), 0);
        assert_eq!((next.theta_e(), next.theta_d(), next.theta_a()), ("E0", "D0", "A0"));
        assert_eq!(next.version(), 1);
    }

    #[test]
    fn single_candidate_always_adopted() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(2)));
        let p = pcfg();
        let t = TrainConfig { k_prompt_candidates: 1, include_incumbent: false, ..Default::default() };
        let (next, _) = Trainer::new(&roles, &retriever, &p, &t).train_step(&example(), &prompts(), 0);
        assert_ne!(next.theta_a(), "A0");
        assert_ne!(next.theta_d(), "D0");
        assert_ne!(next.theta_e(), "E0");
    }

    #[test]
    fn stage_error_skips_step() {
        let idx = corpus(5);
        let retriever = Bm25Retriever::new(&idx, Bm25Params::default());
        let roles = RoleSet::uniform(Arc::new(MockBackend::new(2)))
            .bind(RoleKind::Answer, Arc::new(FnBackend::new("blank", |_| Ok(vec![String::new()]))));
        let (p, t) = (pcfg(), TrainConfig::default());
        let (next, report) = Trainer::new(&roles, &retriever, &p, &t).train_step(&example(), &prompts(), 0);
        assert_eq!(next, prompts());
        assert!(report.skipped.is_some());
    }
}
