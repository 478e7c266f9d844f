//! Countries task construction and a small synthetic KB generator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::{parse_kb, Atom, KnowledgeBase, SymbolId, Term, Var, Vocabulary};
use crate::oracle;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    #[default]
    S1,
    S2,
    S3,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Level::S1),
            "s2" => Ok(Level::S2),
            "s3" => Ok(Level::S3),
            _ => Err(Error::Config(format!("unknown task level `{s}` (expected s1, s2 or s3)"))),
        }
    }
}

/// Which constants are regions and subregions, and the two relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountriesSchema {
    pub located_in: SymbolId,
    pub neighbor_of: SymbolId,
    pub regions: BTreeSet<SymbolId>,
    pub subregions: BTreeSet<SymbolId>,
}

impl CountriesSchema {
    /// Reads the constant types off the `locatedIn` graph: regions are never
    /// located anywhere, subregions are both located and contain something.
    pub fn infer(facts: &[Atom], vocab: &Vocabulary) -> Result<Self> {
        let located_in = vocab
            .get("locatedIn")
            .ok_or_else(|| Error::UnknownSymbol("locatedIn".into()))?;
        let neighbor_of = vocab
            .get("neighborOf")
            .ok_or_else(|| Error::UnknownSymbol("neighborOf".into()))?;
        let mut subjects = BTreeSet::new();
        let mut objects = BTreeSet::new();
        for f in facts {
            if let Some([p, a, b]) = f.symbols().as_deref() {
                if *p == located_in {
                    subjects.insert(*a);
                    objects.insert(*b);
                }
            }
        }
        Ok(CountriesSchema {
            located_in,
            neighbor_of,
            regions: objects.difference(&subjects).copied().collect(),
            subregions: objects.intersection(&subjects).copied().collect(),
        })
    }

    /// Subjects of `locatedIn` that are not subregions.
    pub fn countries(&self, facts: &[Atom]) -> Vec<SymbolId> {
        let set: BTreeSet<SymbolId> = facts
            .iter()
            .filter_map(|f| f.symbols())
            .filter(|s| s.len() == 3 && s[0] == self.located_in && !self.subregions.contains(&s[1]))
            .map(|s| s[1])
            .collect();
        set.into_iter().collect()
    }

    fn neighbors(&self, facts: &[Atom]) -> BTreeSet<(SymbolId, SymbolId)> {
        let mut out = BTreeSet::new();
        for s in facts.iter().filter_map(|f| f.symbols()) {
            if s.len() == 3 && s[0] == self.neighbor_of {
                out.insert((s[1], s[2]));
                out.insert((s[2], s[1]));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountrySplit {
    pub train: Vec<SymbolId>,
    pub dev: Vec<SymbolId>,
    pub test: Vec<SymbolId>,
}

/// Draws `dev` and `test` countries at random so that each keeps at least
/// one neighbor among the remaining training countries.
pub fn split_countries(
    facts: &[Atom],
    schema: &CountriesSchema,
    dev: usize,
    test: usize,
    seed: u64,
) -> Result<CountrySplit> {
    let countries = schema.countries(facts);
    let adj = schema.neighbors(facts);
    let mut order = countries.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut held: BTreeSet<SymbolId> = BTreeSet::new();
    let mut picked = Vec::new();
    let has_train_neighbor = |c: SymbolId, held: &BTreeSet<SymbolId>| {
        adj.range((c, SymbolId(0))..=(c, SymbolId(u32::MAX)))
            .any(|&(_, n)| !held.contains(&n))
    };
    for &c in &order {
        if picked.len() == dev + test {
            break;
        }
        held.insert(c);
        if held.iter().all(|&h| has_train_neighbor(h, &held)) {
            picked.push(c);
        } else {
            held.remove(&c);
        }
    }
    if picked.len() < dev + test {
        return Err(Error::Split(format!(
            "only {} of {} countries can be held out with a training neighbor",
            picked.len(),
            dev + test
        )));
    }
    let test_set = picked.split_off(dev);
    Ok(CountrySplit {
        train: countries.into_iter().filter(|c| !held.contains(c)).collect(),
        dev: picked,
        test: test_set,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskOptions {
    pub level: Level,
    /// Remove dev countries' atoms along with the test countries'.
    pub remove_dev: bool,
}

impl Default for TaskOptions {
    fn default() -> Self {
        TaskOptions {
            level: Level::S1,
            remove_dev: true,
        }
    }
}

impl TaskOptions {
    pub fn level(mut self, level: Level) -> Self {
        self.level = level;
        self
    }

    pub fn with_dev_kept(mut self) -> Self {
        self.remove_dev = false;
        self
    }
}

/// A labelled ground query.
pub type LabelledQuery = (Vec<SymbolId>, bool);

#[derive(Clone, Debug)]
pub struct CountriesTask {
    pub kb: KnowledgeBase,
    /// Test country x region, sorted by country then region.
    pub test_queries: Vec<LabelledQuery>,
    pub dev_queries: Vec<LabelledQuery>,
    pub removed: Vec<Atom>,
}

pub fn build_countries_task(
    vocab: &Vocabulary,
    facts: &[Atom],
    schema: &CountriesSchema,
    split: &CountrySplit,
    opts: TaskOptions,
) -> Result<CountriesTask> {
    let adj = schema.neighbors(facts);
    let train: BTreeSet<SymbolId> = split.train.iter().copied().collect();
    for &c in split.dev.iter().chain(&split.test) {
        if train.contains(&c) {
            return Err(Error::Split(format!("`{}` is in train and a held-out split", vocab.name(c))));
        }
        if !adj.iter().any(|&(a, b)| a == c && train.contains(&b)) {
            return Err(Error::Split(format!("`{}` has no neighbor in the training set", vocab.name(c))));
        }
    }
    if schema.regions.is_empty() {
        return Err(Error::Split("no regions found".into()));
    }
    let mut held: BTreeSet<SymbolId> = split.test.iter().copied().collect();
    if opts.remove_dev {
        held.extend(split.dev.iter().copied());
    }
    let touched: BTreeSet<SymbolId> = if opts.level == Level::S3 {
        let near: BTreeSet<SymbolId> = split.test.iter().chain(&split.dev).copied().collect();
        adj.iter()
            .filter(|(a, b)| train.contains(a) && near.contains(b))
            .map(|&(a, _)| a)
            .collect()
    } else {
        BTreeSet::new()
    };
    let drop = |s: &[SymbolId]| -> bool {
        if s.len() != 3 || s[0] != schema.located_in {
            return false;
        }
        let region = schema.regions.contains(&s[2]);
        let subregion = schema.subregions.contains(&s[2]);
        (held.contains(&s[1]) && (region || (opts.level >= Level::S2 && subregion)))
            || (touched.contains(&s[1]) && region)
    };

    let mut kb = KnowledgeBase::with_vocabulary(vocab.clone());
    let mut removed = Vec::new();
    for f in facts {
        let s = f.symbols()
            .ok_or_else(|| Error::Config("countries facts must be ground".into()))?;
        if drop(&s) {
            removed.push(f.clone());
        } else {
            kb.add_fact(f.clone());
        }
    }
    let truth: BTreeSet<Vec<SymbolId>> = facts.iter().filter_map(Atom::symbols).collect();
    let queries = |countries: &[SymbolId]| -> Vec<LabelledQuery> {
        let mut cs = countries.to_vec();
        cs.sort();
        cs.iter()
            .flat_map(|&c| schema.regions.iter().map(move |&r| [schema.located_in, c, r].to_vec()))
            .map(|q| {
                let label = truth.contains(&q);
                (q, label)
            })
            .collect()
    };
    Ok(CountriesTask {
        test_queries: queries(&split.test),
        dev_queries: queries(&split.dev),
        kb,
        removed,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Shape {
    /// Random binary facts and chain/inverse rules.
    #[default]
    Random,
    /// The grandfather example, padded with random facts up to `facts`.
    FamilyTree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub constants: usize,
    pub predicates: usize,
    pub facts: usize,
    pub rules: usize,
    /// Longest rule body; 1 to 3.
    pub max_body: usize,
    pub depth: usize,
    /// Random ground goals to label (before deduplication).
    pub goals: usize,
    pub shape: Shape,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            constants: 6,
            predicates: 4,
            facts: 12,
            rules: 3,
            max_body: 2,
            depth: 2,
            goals: 20,
            shape: Shape::Random,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticKb {
    pub kb: KnowledgeBase,
    pub provable: Vec<Vec<SymbolId>>,
    pub unprovable: Vec<Vec<SymbolId>>,
}

/// Deterministic in `seed`. Goals are labelled by the symbolic prover at
/// `config.depth`.
pub fn gen_synthetic_kb(config: &SyntheticConfig, seed: u64) -> Result<SyntheticKb> {
    if config.constants == 0 || config.predicates == 0 {
        return Err(Error::Config("synthetic KB needs constants and predicates".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kb = match config.shape {
        Shape::Random => KnowledgeBase::new(),
        Shape::FamilyTree => parse_kb(
            "fatherOf(abe, homer).\nparentOf(homer, bart).\n\
             grandfatherOf(X, Y) :- fatherOf(X, Z), parentOf(Z, Y).",
        )?,
    };
    let consts: Vec<SymbolId> = (0..config.constants)
        .map(|i| kb.vocab_mut().intern(&format!("c{i}")))
        .collect();
    let preds: Vec<SymbolId> = (0..config.predicates)
        .map(|i| kb.vocab_mut().intern(&format!("p{i}")))
        .collect();
    let mut guard = 0;
    while kb.facts().count() < config.facts && guard < 50 * config.facts.max(1) {
        guard += 1;
        let p = preds[rng.gen_range(0..preds.len())];
        let a = consts[rng.gen_range(0..consts.len())];
        let b = consts[rng.gen_range(0..consts.len())];
        kb.add_fact(Atom::ground(&[p, a, b]));
    }
    for _ in 0..config.rules {
        let (head, body, names) = random_rule(&mut rng, &preds, config.max_body.clamp(1, 3));
        kb.add_rule(head, body, names);
    }

    let mut candidates: BTreeSet<Vec<SymbolId>> = BTreeSet::new();
    for _ in 0..config.goals {
        let p = preds[rng.gen_range(0..preds.len())];
        let a = consts[rng.gen_range(0..consts.len())];
        let b = consts[rng.gen_range(0..consts.len())];
        candidates.insert([p, a, b].to_vec());
    }
    if config.shape == Shape::FamilyTree {
        let v = |n: &str| kb.vocab().get(n).unwrap();
        candidates.insert([v("grandfatherOf"), v("abe"), v("bart")].to_vec());
        candidates.insert([v("grandfatherOf"), v("bart"), v("abe")].to_vec());
    }
    let mut provable = Vec::new();
    let mut unprovable = Vec::new();
    for goal in candidates {
        if oracle::sym_provable(&Atom::ground(&goal), config.depth, &kb)? {
            provable.push(goal);
        } else {
            unprovable.push(goal);
        }
    }
    Ok(SyntheticKb {
        kb,
        provable,
        unprovable,
    })
}

/// Heads are `h(X, Y)`; bodies chain `X -> ... -> Y`, each hop optionally
/// reversed.
fn random_rule(rng: &mut ChaCha8Rng, preds: &[SymbolId], max_body: usize) -> (Atom, Vec<Atom>, Vec<String>) {
    let len = rng.gen_range(1..=max_body);
    let var = |i: u32| Term::Var(Var::new(0, i));
    let mut names: Vec<String> = ["X", "Y"].iter().map(|s| s.to_string()).collect();
    // Chain X = v0, v2, v3, ..., Y = v1.
    let mut path = alloc::vec![0u32];
    for i in 1..len {
        names.push(format!("Z{i}"));
        path.push(i as u32 + 1);
    }
    path.push(1);
    let pick = |rng: &mut ChaCha8Rng| Term::Sym(preds[rng.gen_range(0..preds.len())]);
    let head = Atom::new(alloc::vec![pick(rng), var(0), var(1)]);
    let body = path
        .windows(2)
        .map(|w| {
            let (a, b) = if rng.gen_bool(0.3) { (w[1], w[0]) } else { (w[0], w[1]) };
            Atom::new(alloc::vec![pick(rng), var(a), var(b)])
        })
        .collect();
    (head, body, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_kb;

    /// Two regions, one subregion each, a ring of six countries.
    fn mini() -> (Vocabulary, Vec<Atom>) {
        let kb = parse_kb(
            "locatedIn(s1, r1). locatedIn(s2, r2).\n\
             locatedIn(a, s1). locatedIn(a, r1). locatedIn(b, s1). locatedIn(b, r1).\n\
             locatedIn(c, s1). locatedIn(c, r1). locatedIn(d, s2). locatedIn(d, r2).\n\
             locatedIn(e, s2). locatedIn(e, r2). locatedIn(f, s2). locatedIn(f, r2).\n\
             neighborOf(a, b). neighborOf(b, c). neighborOf(c, d).\n\
             neighborOf(d, e). neighborOf(e, f). neighborOf(f, a).",
        )
        .unwrap();
        let facts = kb.facts().map(|r| r.head.clone()).collect();
        (kb.vocab().clone(), facts)
    }

    fn ids(v: &Vocabulary, names: &[&str]) -> Vec<SymbolId> {
        names.iter().map(|n| v.get(n).unwrap()).collect()
    }

    #[test]
    fn schema_inference() {
        let (v, facts) = mini();
        let s = CountriesSchema::infer(&facts, &v).unwrap();
        assert_eq!(s.regions, ids(&v, &["r1", "r2"]).into_iter().collect());
        assert_eq!(s.subregions, ids(&v, &["s1", "s2"]).into_iter().collect());
        assert_eq!(s.countries(&facts), ids(&v, &["a", "b", "c", "d", "e", "f"]));
    }

    #[test]
    fn task_levels() {
        let (v, facts) = mini();
        let s = CountriesSchema::infer(&facts, &v).unwrap();
        let split = CountrySplit {
            train: ids(&v, &["a", "c", "d", "f"]),
            dev: ids(&v, &["e"]),
            test: ids(&v, &["b"]),
        };
        let build = |level| {
            build_countries_task(&v, &facts, &s, &split, TaskOptions { level, remove_dev: true }).unwrap()
        };
        let (t1, t2, t3) = (build(Level::S1), build(Level::S2), build(Level::S3));
        assert_eq!(t1.removed.len(), 2);
        assert_eq!(t2.removed.len(), 4);
        // a, c, d and f all border b or e.
        assert_eq!(t3.removed.len(), 8);
        assert_eq!(t1.test_queries.len(), 2);
        assert_eq!(
            t1.test_queries.iter().map(|q| q.1).collect::<Vec<_>>(),
            [true, false]
        );
        for t in [&t1, &t2, &t3] {
            assert_eq!(t.kb.facts().count() + t.removed.len(), facts.len());
            for r in &t.removed {
                assert_eq!(r.terms[0], Term::Sym(s.located_in));
            }
            for (q, _) in t.test_queries.iter().chain(&t.dev_queries) {
                assert!(!t.kb.contains_fact(q));
            }
        }
        let keep_dev = build_countries_task(&v, &facts, &s, &split, TaskOptions::default().with_dev_kept()).unwrap();
        assert_eq!(keep_dev.removed.len(), 1);
    }

    #[test]
    fn held_out_country_needs_train_neighbor() {
        let (v, facts) = mini();
        let s = CountriesSchema::infer(&facts, &v).unwrap();
        let split = CountrySplit {
            train: ids(&v, &["a", "d", "e", "f"]),
            dev: ids(&v, &["b"]),
            test: ids(&v, &["c"]),
        };
        assert!(build_countries_task(&v, &facts, &s, &split, TaskOptions::default()).is_ok());
        let split = CountrySplit {
            train: ids(&v, &["a", "e", "f"]),
            dev: ids(&v, &["b", "d"]),
            test: ids(&v, &["c"]),
        };
        assert!(matches!(
            build_countries_task(&v, &facts, &s, &split, TaskOptions::default()),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn generated_split_respects_neighbors() {
        let (v, facts) = mini();
        let s = CountriesSchema::infer(&facts, &v).unwrap();
        for seed in 0..10 {
            let split = split_countries(&facts, &s, 1, 1, seed).unwrap();
            assert_eq!((split.train.len(), split.dev.len(), split.test.len()), (4, 1, 1));
            build_countries_task(&v, &facts, &s, &split, TaskOptions::default()).unwrap();
        }
        assert!(split_countries(&facts, &s, 3, 3, 0).is_err());
    }

    #[test]
    fn level_parsing() {
        assert_eq!("S2".parse::<Level>().unwrap(), Level::S2);
        assert!("s4".parse::<Level>().is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_labelled() {
        let cfg = SyntheticConfig::default();
        let a = gen_synthetic_kb(&cfg, 7).unwrap();
        let b = gen_synthetic_kb(&cfg, 7).unwrap();
        assert_eq!(a.kb.render(), b.kb.render());
        assert_eq!(a.provable, b.provable);
        for g in &a.provable {
            assert!(oracle::sym_provable(&Atom::ground(g), cfg.depth, &a.kb).unwrap());
        }
        for g in &a.unprovable {
            assert!(!oracle::sym_provable(&Atom::ground(g), cfg.depth, &a.kb).unwrap());
        }
        assert!(a.kb.facts().count() <= cfg.facts);
    }

    #[test]
    fn family_tree_shape() {
        let cfg = SyntheticConfig {
            shape: Shape::FamilyTree,
            facts: 4,
            rules: 0,
            ..SyntheticConfig::default()
        };
        let s = gen_synthetic_kb(&cfg, 1).unwrap();
        let v = |n: &str| s.kb.vocab().get(n).unwrap();
        assert!(s.provable.contains(&[v("grandfatherOf"), v("abe"), v("bart")].to_vec()));
        assert!(s.unprovable.contains(&[v("grandfatherOf"), v("bart"), v("abe")].to_vec()));
    }
}
