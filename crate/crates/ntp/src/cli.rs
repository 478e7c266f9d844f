//! The `ntp` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ntp_core::datasets::{
    gen_synthetic_kb, split_countries, CountriesSchema, Level, Shape, SyntheticConfig, TaskOptions,
};
use ntp_core::kb::{load_triples, parse_kb_into, parse_query, TripleLayout};
use ntp_core::oracle::sym_prove;
use ntp_core::prover::{prove_with, NumericBackend, ProofTerm, ProveOptions, TermDisplay};
use ntp_core::{KnowledgeBase, Term};
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::countries::countries_triples;
use crate::data;
use crate::experiment::{self, CountriesData, Evaluation};

#[derive(Parser, Debug)]
#[command(name = "ntp", version, about = "Differentiable backward-chaining prover")]
pub struct Cli {
    /// Worker threads for batch scoring and evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write checkpoint, log and metrics.
    Train(TrainArgs),
    /// Score a trained run on its test queries.
    Eval(EvalArgs),
    /// Prove a query symbolically or with trained embeddings.
    Prove(ProveArgs),
    /// List the induced rules of a run, most confident first.
    Decode(DecodeArgs),
    /// Produce datasets.
    #[command(subcommand, name = "gen-data")]
    GenData(GenData),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum Layout {
    /// relation, arg1, arg2
    #[default]
    RelationFirst,
    /// arg1, relation, arg2
    RelationSecond,
}

impl From<Layout> for TripleLayout {
    fn from(l: Layout) -> Self {
        match l {
            Layout::RelationFirst => TripleLayout::RelationFirst,
            Layout::RelationSecond => TripleLayout::RelationSecond,
        }
    }
}

/// Hyperparameter flags; each overrides the config file's key of the same name.
#[derive(Args, Debug, Default)]
pub struct HyperFlags {
    /// TOML or JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_known: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Average (true) or sum (false) the batch likelihood.
    #[arg(long)]
    pub mean_loss: Option<bool>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: Option<u64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// K-max pruning width, 0 for exact proofs.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// ntp, ntp-lambda or complex.
    #[arg(long = "model")]
    pub mode: Option<String>,
}

impl HyperFlags {
    fn config(&self) -> Result<Config> {
        let file = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let flags = Config {
            k: self.k,
            learning_rate: self.learning_rate,
            batch_known: self.batch_known,
            negatives: self.negatives,
            l2: self.l2,
            mean_loss: self.mean_loss,
            clip: self.clip,
            epochs: self.epochs,
            depth: self.depth.map(|d| d as usize),
            mu: self.mu,
            kmax: self.kmax,
            seed: self.seed,
            mode: self.mode.clone(),
        };
        Ok(flags.overlay(&file))
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training KB: `.ntp` clauses, or `.tsv`/`.txt` triples.
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long, value_enum, default_value_t = Layout::RelationFirst)]
    pub layout: Layout,
    /// Directory with train.txt, dev.txt and test.txt country lists.
    #[arg(long, requires = "task")]
    pub splits: Option<PathBuf>,
    /// Countries task level.
    #[arg(long, value_parser = parse_level, requires = "splits")]
    pub task: Option<Level>,
    /// Keep the dev countries' locatedIn atoms in the training KB.
    #[arg(long)]
    pub keep_dev: bool,
    /// Dev triples (link prediction).
    #[arg(long, conflicts_with = "splits")]
    pub dev: Option<PathBuf>,
    /// Test triples (link prediction).
    #[arg(long, conflicts_with = "splits")]
    pub test: Option<PathBuf>,
    /// Rule templates (`.tmpl`).
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperFlags,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: ntp_core::Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Rank these triples instead of the run's stored test queries.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Layout::RelationFirst)]
    pub layout: Layout,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProveArgs {
    /// Knowledge base (`.ntp` or triples).
    #[arg(long, required_unless_present = "run")]
    pub kb: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Layout::RelationFirst)]
    pub layout: Layout,
    /// Query atom, e.g. `grandfatherOf(Q, bart)`.
    #[arg(long)]
    pub query: String,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: u64,
    /// Enumerate symbolic proofs instead of scoring with embeddings.
    #[arg(long)]
    pub symbolic: bool,
    /// Embeddings for differentiable proving.
    #[arg(long, conflicts_with = "symbolic")]
    pub checkpoint: Option<PathBuf>,
    /// Use a run directory's KB and checkpoint.
    #[arg(long, conflicts_with_all = ["kb", "checkpoint"])]
    pub run: Option<PathBuf>,
    /// K-max pruning width (differentiable mode).
    #[arg(long)]
    pub kmax: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub run: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum GenData {
    /// Countries triples and a split from the `world-countries` JSON.
    Countries {
        /// countries.json of the world-countries package.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        dev: usize,
        #[arg(long, default_value_t = 20)]
        test: usize,
    },
    /// A small random KB with provable and unprovable goals.
    Synthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        constants: usize,
        #[arg(long, default_value_t = 4)]
        predicates: usize,
        #[arg(long, default_value_t = 12)]
        facts: usize,
        #[arg(long, default_value_t = 3)]
        rules: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long)]
        family: bool,
    },
}

/// Parses arguments and runs; usage errors exit 2, failures 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global() {
        log::debug!("thread pool already set up: {e}");
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Prove(a) => prove(a),
        Command::Decode(a) => decode(a),
        Command::GenData(g) => gen_data(g),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let hp = a.hyper.config()?.hyperparams()?;
    let templates = a.templates.as_deref().map(data::read_templates).transpose()?.unwrap_or_default();
    let layout = a.layout.into();
    let task = match (&a.splits, a.task) {
        (Some(dir), Some(level)) => {
            let countries = CountriesData::load(&a.kb, dir, layout)?;
            let mut opts = TaskOptions::default().level(level);
            opts.remove_dev = !a.keep_dev;
            countries.task(opts, &templates)?
        }
        _ => experiment::link_prediction_task(&a.kb, a.dev.as_deref(), a.test.as_deref(), layout, &templates)?,
    };
    log::info!(
        "training {} on {} clauses, {} symbols",
        hp.mode.name(),
        task.kb.len(),
        task.kb.vocab().len()
    );
    let (trained, metrics) = experiment::run_and_save(&task, &hp, &a.out)?;
    if let Some(last) = trained.history.last() {
        eprintln!("epoch {} loss {:.4}", last.epoch, last.loss);
    }
    eprintln!("{}", metrics.summary());
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut run = experiment::load_run(&a.run)?;
    if let Some(test) = &a.test {
        let mut vocab = run.task.kb.vocab().clone();
        let before = vocab.len();
        let facts = data::read_facts(test, a.layout.into(), true, &mut vocab)?;
        if vocab.len() != before {
            bail!("checkpoint/vocabulary mismatch: {} has symbols the run has never seen", test.display());
        }
        let test: Vec<_> = facts.iter().filter_map(|f| f.symbols()).collect();
        let mut known: std::collections::BTreeSet<_> = run.task.kb.facts().filter_map(|r| r.head.symbols()).collect();
        if let Evaluation::Ranking { known: k, .. } = &run.task.eval {
            known.extend(k.iter().cloned());
        }
        known.extend(test.iter().cloned());
        let entities: std::collections::BTreeSet<_> = known.iter().flat_map(|f| f[1..].iter().copied()).collect();
        run.task.eval = Evaluation::Ranking {
            test,
            known,
            entities: entities.into_iter().collect(),
        };
    }
    let metrics = run.task.evaluate(&run.emb, &run.hp)?;
    let text = serde_json::to_string_pretty(&metrics)?;
    println!("{text}");
    if let Some(out) = &a.out {
        metrics.save(out)?;
    }
    eprintln!("{}", metrics.summary());
    Ok(())
}

fn load_kb(path: &Path, layout: TripleLayout, kb: &mut KnowledgeBase) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if data::is_triples(path) {
        for atom in load_triples(&text, layout, false, kb.vocab_mut())?.atoms {
            kb.add_fact(atom);
        }
    } else {
        parse_kb_into(&text, kb)?;
    }
    Ok(())
}

fn prove(a: ProveArgs) -> Result<()> {
    let depth = a.depth as usize;
    let (kb, emb, mu) = if let Some(dir) = &a.run {
        let run = experiment::load_run(dir)?;
        (run.task.kb, Some(run.emb), run.hp.mu)
    } else {
        let kb_path = a.kb.as_deref().expect("clap enforces --kb or --run");
        match &a.checkpoint {
            Some(ck_path) => {
                let ck = Checkpoint::load(ck_path)?;
                let mut kb = KnowledgeBase::with_vocabulary(ck.vocabulary()?);
                load_kb(kb_path, a.layout.into(), &mut kb)?;
                let emb = ck.embeddings_for(kb.vocab())?;
                (kb, Some(emb), ck.mu)
            }
            None => {
                let mut kb = KnowledgeBase::new();
                load_kb(kb_path, a.layout.into(), &mut kb)?;
                (kb, None, ntp_core::math::DEFAULT_MU)
            }
        }
    };
    let query = parse_query(&a.query, kb.vocab())?;
    let vocab = kb.vocab();

    let Some(emb) = emb.filter(|_| !a.symbolic) else {
        if !a.symbolic {
            bail!("differentiable proving needs --checkpoint or --run (or pass --symbolic)");
        }
        let solutions = sym_prove(&query.atom, depth, &kb)?;
        let mut seen = std::collections::BTreeSet::new();
        let mut lines = Vec::new();
        for b in &solutions {
            let line = b
                .iter()
                .filter(|(v, _)| query.var_names.get(v.index as usize).is_some_and(|n| n != "_"))
                .map(|(v, t)| {
                    let value = match *t {
                        Term::Sym(s) => TermDisplay::new(ProofTerm::sym(s), vocab, &[]).to_string(),
                        Term::Var(w) => format!("_G{}_{}", w.scope, w.index),
                    };
                    format!("{} = {value}", query.var_names[v.index as usize])
                })
                .collect::<Vec<_>>()
                .join(", ");
            if seen.insert(line.clone()) {
                lines.push(line);
            }
        }
        match (lines.as_slice(), solutions.is_empty()) {
            (_, true) => println!("false."),
            ([only], false) if only.is_empty() => println!("true."),
            _ => lines.iter().for_each(|l| println!("{l}")),
        }
        return Ok(());
    };

    let opts = ProveOptions::new(depth).kmax(a.kmax.filter(|&k| k > 0)).trace(true);
    let goal = ProofTerm::atom(&query.atom, 0);
    let mut backend = NumericBackend::new(&emb).with_mu(mu);
    let outcome = prove_with(&kb, &goal, &opts, &mut backend)?;
    let show = |t: ProofTerm| TermDisplay::new(t, vocab, &query.var_names).to_string();
    let show_atom = |terms: &[ProofTerm]| {
        let args: Vec<String> = terms[1..].iter().map(|&t| show(t)).collect();
        format!("{}({})", show(terms[0]), args.join(","))
    };
    println!("score {:.6}", outcome.success.value);
    let mut report = json!({ "score": outcome.success.value });
    if let Some(best) = outcome.best_state() {
        let bindings: Vec<String> = query
            .var_names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.as_str() != "_")
            .map(|(i, n)| format!("{n} = {}", show(best.subs.resolve(ProofTerm::Var(ntp_core::Var::new(0, i as u32))))))
            .collect();
        if !bindings.is_empty() {
            println!("{}", bindings.join(", "));
        }
        for step in &best.trace {
            let rule = kb.rule(step.rule);
            let rule_text = ntp_core::kb::RuleDisplay::new(rule, vocab).compact().to_string();
            println!(
                "  depth {} goal {} rule {} success {:.6}",
                step.depth,
                show_atom(&step.goal),
                rule_text,
                step.success
            );
        }
        report["bindings"] = json!(bindings);
    }
    log::debug!("{report}");
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let run = experiment::load_run(&a.run)?;
    for rule in run.task.decode(&run.emb, run.hp.mu)? {
        println!("{rule}");
    }
    Ok(())
}

fn gen_data(g: GenData) -> Result<()> {
    match g {
        GenData::Countries { from, out, seed, dev, test } => {
            let json = fs::read_to_string(&from).with_context(|| format!("reading {}", from.display()))?;
            let triples = countries_triples(&json)?;
            fs::create_dir_all(&out)?;
            let text: String = triples.iter().map(|(r, a, b)| format!("{r}\t{a}\t{b}\n")).collect();
            let tsv = out.join("countries.tsv");
            fs::write(&tsv, &text)?;
            let mut vocab = ntp_core::Vocabulary::new();
            let facts = data::read_facts(&tsv, TripleLayout::RelationFirst, true, &mut vocab)?;
            let schema = CountriesSchema::infer(&facts, &vocab)?;
            let split = split_countries(&facts, &schema, dev, test, seed)?;
            data::write_country_split(&out, &vocab, &split)?;
            eprintln!(
                "{} facts, {} regions, {} subregions, split {}/{}/{}",
                facts.len(),
                schema.regions.len(),
                schema.subregions.len(),
                split.train.len(),
                split.dev.len(),
                split.test.len()
            );
            Ok(())
        }
        GenData::Synthetic { out, seed, constants, predicates, facts, rules, depth, family } => {
            let cfg = SyntheticConfig {
                constants,
                predicates,
                facts,
                rules,
                depth,
                shape: if family { Shape::FamilyTree } else { Shape::Random },
                ..SyntheticConfig::default()
            };
            let s = gen_synthetic_kb(&cfg, seed)?;
            fs::write(&out, s.kb.render())?;
            let v = s.kb.vocab();
            let show = |g: &Vec<ntp_core::SymbolId>| {
                ntp_core::kb::AtomDisplay::new(&ntp_core::Atom::ground(g), v, &[]).compact().to_string()
            };
            let goals = json!({
                "depth": depth,
                "provable": s.provable.iter().map(show).collect::<Vec<_>>(),
                "unprovable": s.unprovable.iter().map(show).collect::<Vec<_>>(),
            });
            let goals_path = out.with_extension("goals.json");
            fs::write(&goals_path, serde_json::to_string_pretty(&goals)?)?;
            eprintln!("wrote {} and {}", out.display(), goals_path.display());
            Ok(())
        }
    }
}
