//! End-to-end pipelines: build a task, train on it, evaluate, persist runs.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ntp_core::datasets::{build_countries_task, CountriesSchema, CountrySplit, LabelledQuery, TaskOptions};
use ntp_core::eval::{auc_pr, decode_rules, evaluate_ranking, DecodedRule};
use ntp_core::kb::{parse_kb_into, AtomDisplay, TripleLayout};
use ntp_core::trainer::{train, EpochRecord, Hyperparams, Model, Trained};
use ntp_core::{Atom, EmbeddingMatrix, KnowledgeBase, RuleTemplate, SymbolId, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::data;
use crate::report::{FactReport, LogRecord, LogWriter, Metrics};

/// How a trained model is scored.
#[derive(Clone, Debug, PartialEq)]
pub enum Evaluation {
    /// AUC-PR over labelled queries (Countries).
    Classification {
        test: Vec<LabelledQuery>,
        dev: Vec<LabelledQuery>,
    },
    /// Filtered MRR / HITS@m over test facts.
    Ranking {
        test: Vec<Vec<SymbolId>>,
        /// Facts excluded from the candidate lists.
        known: BTreeSet<Vec<SymbolId>>,
        entities: Vec<SymbolId>,
    },
}

/// A training KB (templates instantiated) and its evaluation protocol.
#[derive(Clone, Debug)]
pub struct Task {
    pub kb: KnowledgeBase,
    pub eval: Evaluation,
}

/// The Countries KB as stored on disk: `countries.tsv` plus split lists.
#[derive(Clone, Debug)]
pub struct CountriesData {
    pub vocab: Vocabulary,
    pub facts: Vec<Atom>,
    pub schema: CountriesSchema,
    pub split: CountrySplit,
}

impl CountriesData {
    pub fn load(kb: &Path, splits: &Path, layout: TripleLayout) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        let facts = data::read_facts(kb, layout, true, &mut vocab)?;
        let schema = CountriesSchema::infer(&facts, &vocab)?;
        let split = data::read_country_split(splits, &vocab)?;
        Ok(CountriesData { vocab, facts, schema, split })
    }

    /// `dir/countries.tsv` with `train.txt`, `dev.txt`, `test.txt` beside it.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load(&dir.join("countries.tsv"), dir, TripleLayout::RelationFirst)
    }

    pub fn task(&self, opts: TaskOptions, templates: &[RuleTemplate]) -> Result<Task> {
        let t = build_countries_task(&self.vocab, &self.facts, &self.schema, &self.split, opts)?;
        log::info!(
            "{:?}: {} training facts, {} removed, {} test queries",
            opts.level,
            t.kb.len(),
            t.removed.len(),
            t.test_queries.len()
        );
        let mut kb = t.kb;
        kb.instantiate_templates(templates);
        Ok(Task {
            kb,
            eval: Evaluation::Classification {
                test: t.test_queries,
                dev: t.dev_queries,
            },
        })
    }
}

/// Link prediction on triples: train on `train`, rank `test` (dev and test
/// facts are added to the filter).
pub fn link_prediction_task(
    train: &Path,
    dev: Option<&Path>,
    test: Option<&Path>,
    layout: TripleLayout,
    templates: &[RuleTemplate],
) -> Result<Task> {
    let mut kb = data::read_kb(train, layout, true)?;
    let mut vocab = kb.vocab().clone();
    let dev = dev.map(|p| data::read_facts(p, layout, true, &mut vocab)).transpose()?.unwrap_or_default();
    let test = test.map(|p| data::read_facts(p, layout, true, &mut vocab)).transpose()?.unwrap_or_default();
    *kb.vocab_mut() = vocab;
    let mut known: BTreeSet<Vec<SymbolId>> = kb.facts().filter_map(|r| r.head.symbols()).collect();
    known.extend(dev.iter().chain(&test).filter_map(Atom::symbols));
    let entities: BTreeSet<SymbolId> = known.iter().flat_map(|f| f[1..].iter().copied()).collect();
    kb.instantiate_templates(templates);
    Ok(Task {
        kb,
        eval: Evaluation::Ranking {
            test: test.iter().filter_map(Atom::symbols).collect(),
            known,
            entities: entities.into_iter().collect(),
        },
    })
}

impl Task {
    /// Trains, reporting each epoch to `on_epoch`. Countries tasks compute
    /// the dev AUC-PR after every epoch.
    pub fn train(&self, hp: &Hyperparams, on_epoch: &mut dyn FnMut(&EpochRecord) -> Result<()>) -> Result<Trained> {
        let mut last_loss = f64::NAN;
        let mut hook = |epoch: usize, emb: &EmbeddingMatrix| -> ntp_core::Result<Option<f64>> {
            let metric = match &self.eval {
                Evaluation::Classification { dev, .. } if !dev.is_empty() => {
                    let atoms: Vec<Vec<SymbolId>> = dev.iter().map(|q| q.0.clone()).collect();
                    let scores = Model::new(&self.kb, emb, hp).score_all(&atoms)?;
                    let pairs: Vec<(f64, bool)> = scores.into_iter().zip(dev.iter().map(|q| q.1)).collect();
                    auc_pr(&pairs).ok()
                }
                _ => None,
            };
            log::debug!("epoch {epoch}: dev {metric:?}");
            Ok(metric)
        };
        let trained = train(&self.kb, hp, &mut hook)?;
        for rec in &trained.history {
            last_loss = rec.loss;
            on_epoch(rec)?;
        }
        log::info!("trained {} epochs, final loss {last_loss:.4}", trained.history.len());
        Ok(trained)
    }

    pub fn evaluate(&self, emb: &EmbeddingMatrix, hp: &Hyperparams) -> Result<Metrics> {
        let model = Model::new(&self.kb, emb, hp);
        let vocab = self.kb.vocab();
        let show = |s: &[SymbolId]| AtomDisplay::new(&Atom::ground(s), vocab, &[]).compact().to_string();
        match &self.eval {
            Evaluation::Classification { test, .. } => {
                let atoms: Vec<Vec<SymbolId>> = test.iter().map(|q| q.0.clone()).collect();
                let scores = model.score_all(&atoms)?;
                let pairs: Vec<(f64, bool)> = scores.iter().copied().zip(test.iter().map(|q| q.1)).collect();
                Ok(Metrics {
                    auc_pr: Some(auc_pr(&pairs)?),
                    per_fact: test
                        .iter()
                        .zip(&scores)
                        .map(|(q, &s)| FactReport {
                            fact: show(&q.0),
                            score: Some(s),
                            label: Some(q.1),
                            ..FactReport::default()
                        })
                        .collect(),
                    ..Metrics::default()
                })
            }
            Evaluation::Ranking { test, known, entities } => {
                if test.is_empty() {
                    return Ok(Metrics::default());
                }
                let is_known = |a: &[SymbolId]| known.contains(a);
                let mut scorer = |atoms: &[Vec<SymbolId>]| model.score_all(atoms);
                let res = evaluate_ranking(test, &is_known, entities, &mut scorer)?;
                Ok(Metrics {
                    mrr: Some(res.mrr),
                    hits1: Some(res.hits1),
                    hits3: Some(res.hits3),
                    hits10: Some(res.hits10),
                    auc_pr: None,
                    per_fact: test
                        .iter()
                        .zip(&res.ranks)
                        .map(|(f, &(a, b))| FactReport {
                            fact: show(f),
                            rank_first: Some(a),
                            rank_second: Some(b),
                            ..FactReport::default()
                        })
                        .collect(),
                })
            }
        }
    }

    pub fn decode(&self, emb: &EmbeddingMatrix, mu: f64) -> Result<Vec<DecodedRule>> {
        Ok(decode_rules(&self.kb, emb, mu)?)
    }
}

/// Evaluation queries by symbol name, so a run directory is self-contained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StoredEvaluation {
    Classification {
        test: Vec<(Vec<String>, bool)>,
        dev: Vec<(Vec<String>, bool)>,
    },
    Ranking {
        test: Vec<Vec<String>>,
        known: Vec<Vec<String>>,
        entities: Vec<String>,
    },
}

fn names(v: &Vocabulary, s: &[SymbolId]) -> Vec<String> {
    s.iter().map(|&i| v.name(i).to_string()).collect()
}

fn ids(v: &Vocabulary, n: &[String]) -> Result<Vec<SymbolId>> {
    n.iter()
        .map(|x| v.get(x).with_context(|| format!("unknown symbol `{x}` in run queries")))
        .collect()
}

pub const CHECKPOINT: &str = "checkpoint.json";
pub const KB: &str = "kb.ntp";
pub const CONFIG: &str = "config.json";
pub const QUERIES: &str = "queries.json";
pub const LOG: &str = "log.jsonl";
pub const METRICS: &str = "metrics.json";

/// Writes the KB, queries and resolved config of a run.
pub fn save_task(dir: &Path, task: &Task, hp: &Hyperparams) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let v = task.kb.vocab();
    let stored = match &task.eval {
        Evaluation::Classification { test, dev } => StoredEvaluation::Classification {
            test: test.iter().map(|q| (names(v, &q.0), q.1)).collect(),
            dev: dev.iter().map(|q| (names(v, &q.0), q.1)).collect(),
        },
        Evaluation::Ranking { test, known, entities } => StoredEvaluation::Ranking {
            test: test.iter().map(|f| names(v, f)).collect(),
            known: known.iter().map(|f| names(v, f)).collect(),
            entities: names(v, entities),
        },
    };
    fs::write(dir.join(KB), task.kb.render())?;
    fs::write(dir.join(QUERIES), serde_json::to_string(&stored)?)?;
    fs::write(dir.join(CONFIG), serde_json::to_string_pretty(&Config::resolved(hp))?)?;
    Ok(())
}

/// A saved run: task rebuilt over the checkpoint's vocabulary.
pub struct Run {
    pub task: Task,
    pub emb: EmbeddingMatrix,
    pub hp: Hyperparams,
}

pub fn load_run(dir: &Path) -> Result<Run> {
    let ck = Checkpoint::load(&dir.join(CHECKPOINT))?;
    let hp = Config::load(&dir.join(CONFIG))?.hyperparams()?;
    let mut kb = KnowledgeBase::with_vocabulary(ck.vocabulary()?);
    let text = fs::read_to_string(dir.join(KB)).with_context(|| format!("reading {}", dir.join(KB).display()))?;
    parse_kb_into(&text, &mut kb)?;
    let emb = ck.embeddings_for(kb.vocab())?;
    let qtext = fs::read_to_string(dir.join(QUERIES))?;
    let v = kb.vocab();
    let eval = match serde_json::from_str::<StoredEvaluation>(&qtext)? {
        StoredEvaluation::Classification { test, dev } => Evaluation::Classification {
            test: test.iter().map(|(q, l)| Ok((ids(v, q)?, *l))).collect::<Result<_>>()?,
            dev: dev.iter().map(|(q, l)| Ok((ids(v, q)?, *l))).collect::<Result<_>>()?,
        },
        StoredEvaluation::Ranking { test, known, entities } => Evaluation::Ranking {
            test: test.iter().map(|f| ids(v, f)).collect::<Result<_>>()?,
            known: known.iter().map(|f| ids(v, f)).collect::<Result<_>>()?,
            entities: ids(v, &entities)?,
        },
    };
    Ok(Run {
        task: Task { kb, eval },
        emb,
        hp,
    })
}

/// Trains `task` and writes checkpoint, log, metrics and decoded rules to
/// `out`.
pub fn run_and_save(task: &Task, hp: &Hyperparams, out: &Path) -> Result<(Trained, Metrics)> {
    save_task(out, task, hp)?;
    let mut log = LogWriter::create(&out.join(LOG))?;
    let trained = task.train(hp, &mut |rec| log.write(&LogRecord::from(rec)))?;
    Checkpoint::new(task.kb.vocab(), &trained.emb, hp.mu).save(&out.join(CHECKPOINT))?;
    let metrics = task.evaluate(&trained.emb, hp)?;
    metrics.save(&out.join(METRICS))?;
    let rules = task.decode(&trained.emb, hp.mu)?;
    let text: String = rules.iter().map(|r| format!("{r}\n")).collect();
    fs::write(out.join("rules.txt"), text)?;
    Ok((trained, metrics))
}
