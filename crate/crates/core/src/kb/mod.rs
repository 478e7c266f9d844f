//! Symbolic knowledge bases.
//!
//! Predicates and constants share a single vocabulary: every non-variable
//! symbol gets one [`SymbolId`] and, later, one embedding row. An [`Atom`] is
//! a flat list of terms whose first element is the predicate.

mod parse;
pub(crate) mod render;
mod template;
mod triples;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use parse::{parse_kb, parse_kb_into, parse_query, parse_templates, Query};
pub use render::{needs_quotes, AtomDisplay, RuleDisplay};
pub use template::{instantiate_templates, RuleTemplate, TemplateArg, TemplateAtom};
pub use triples::{load_triples, split_dataset, TripleLayout, TripleLoad};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

impl SymbolId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A variable, scoped to one rule application (scope 0 is the stored rule or
/// the user's query; the prover renames rule variables into fresh scopes).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub scope: u32,
    pub index: u32,
}

impl Var {
    pub const fn new(scope: u32, index: u32) -> Self {
        Var { scope, index }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Sym(SymbolId),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn symbol(&self) -> Option<SymbolId> {
        match *self {
            Term::Sym(s) => Some(s),
            Term::Var(_) => None,
        }
    }
}

/// Predicate followed by its arguments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(terms: Vec<Term>) -> Self {
        debug_assert!(!terms.is_empty());
        Atom { terms }
    }

    pub fn ground(symbols: &[SymbolId]) -> Self {
        Atom {
            terms: symbols.iter().map(|&s| Term::Sym(s)).collect(),
        }
    }

    pub fn predicate(&self) -> Term {
        self.terms[0]
    }

    pub fn args(&self) -> &[Term] {
        &self.terms[1..]
    }

    /// Number of arguments, excluding the predicate.
    pub fn arity(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(|t| !t.is_var())
    }

    /// Symbol ids of a ground atom, `None` if any term is a variable.
    pub fn symbols(&self) -> Option<Vec<SymbolId>> {
        self.terms.iter().map(Term::symbol).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub u32);

impl RuleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// `head :- body`. A fact is a ground rule with an empty body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub head: Atom,
    pub body: Vec<Atom>,
    /// Source names of the rule's variables, indexed by `Var::index`.
    pub var_names: Vec<String>,
    pub ground: bool,
}

impl Rule {
    pub fn is_fact(&self) -> bool {
        self.ground && self.body.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        core::iter::once(&self.head).chain(self.body.iter())
    }

    pub fn signature(&self) -> Signature {
        Signature::of(self.atoms())
    }

    /// True if any predicate or argument is a trainable rule parameter.
    pub fn is_parameterized(&self, vocab: &Vocabulary) -> bool {
        self.atoms()
            .flat_map(|a| a.terms.iter())
            .any(|t| matches!(t, Term::Sym(s) if vocab.is_parameterized(*s)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShapeTerm {
    Sym,
    /// Variables are numbered by first occurrence across the whole rule.
    Var(u32),
}

/// Term-shape of a rule: per atom, the sequence of symbol/variable positions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature(pub Vec<Vec<ShapeTerm>>);

impl Signature {
    pub fn of<'a>(atoms: impl Iterator<Item = &'a Atom>) -> Self {
        let mut seen: BTreeMap<Var, u32> = BTreeMap::new();
        let shape = atoms
            .map(|atom| {
                atom.terms
                    .iter()
                    .map(|t| match *t {
                        Term::Sym(_) => ShapeTerm::Sym,
                        Term::Var(v) => {
                            let next = seen.len() as u32;
                            ShapeTerm::Var(*seen.entry(v).or_insert(next))
                        }
                    })
                    .collect()
            })
            .collect();
        Signature(shape)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub signature: Signature,
    pub rules: Vec<RuleId>,
}

/// Name <-> id map for all non-variable symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: BTreeMap<String, SymbolId>,
    parameterized: Vec<bool>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn intern(&mut self, name: &str) -> SymbolId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = SymbolId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.parameterized.push(false);
        id
    }

    /// Adds a new trainable rule-parameter symbol. Panics if `name` exists.
    pub fn fresh_parameter(&mut self, name: &str) -> SymbolId {
        assert!(
            !self.index.contains_key(name),
            "parameter symbol `{name}` already exists"
        );
        let id = self.intern(name);
        self.parameterized[id.index()] = true;
        id
    }

    pub fn get(&self, name: &str) -> Option<SymbolId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.names[id.index()]
    }

    pub fn is_parameterized(&self, id: SymbolId) -> bool {
        self.parameterized[id.index()]
    }

    pub fn set_parameterized(&mut self, id: SymbolId, flag: bool) {
        self.parameterized[id.index()] = flag;
    }

    pub fn ids(&self) -> impl Iterator<Item = SymbolId> {
        (0..self.names.len() as u32).map(SymbolId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    vocab: Vocabulary,
    rules: Vec<Rule>,
    partitions: Vec<Partition>,
    partition_index: BTreeMap<Signature, usize>,
    facts: BTreeMap<Vec<SymbolId>, RuleId>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty KB that shares symbol ids with `vocab`.
    pub fn with_vocabulary(vocab: Vocabulary) -> Self {
        KnowledgeBase {
            vocab,
            ..Self::default()
        }
    }

    /// Builds a KB from ground atoms; duplicates are dropped.
    pub fn from_facts(vocab: Vocabulary, facts: impl IntoIterator<Item = Atom>) -> Self {
        let mut kb = Self::with_vocabulary(vocab);
        for atom in facts {
            kb.add_fact(atom);
        }
        kb
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_mut(&mut self) -> &mut Vocabulary {
        &mut self.vocab
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.index()]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.is_fact())
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn contains_fact(&self, symbols: &[SymbolId]) -> bool {
        self.facts.contains_key(symbols)
    }

    /// Rule id of the ground fact with these symbols.
    pub fn fact_id(&self, symbols: &[SymbolId]) -> Option<RuleId> {
        self.facts.get(symbols).copied()
    }

    /// Adds a ground fact. Returns `None` when the fact is already present.
    pub fn add_fact(&mut self, atom: Atom) -> Option<RuleId> {
        let symbols = atom.symbols().expect("facts must be ground");
        if self.facts.contains_key(&symbols) {
            return None;
        }
        Some(self.add_rule(atom, Vec::new(), Vec::new()))
    }

    /// Adds a rule (or fact). Facts are not deduplicated here.
    pub fn add_rule(&mut self, head: Atom, body: Vec<Atom>, var_names: Vec<String>) -> RuleId {
        let id = RuleId(self.rules.len() as u32);
        let ground = core::iter::once(&head)
            .chain(body.iter())
            .all(Atom::is_ground);
        let rule = Rule {
            id,
            head,
            body,
            var_names,
            ground,
        };
        if rule.is_fact() {
            self.facts.entry(rule.head.symbols().unwrap()).or_insert(id);
        }
        let signature = rule.signature();
        let slot = match self.partition_index.get(&signature) {
            Some(&slot) => slot,
            None => {
                let slot = self.partitions.len();
                self.partitions.push(Partition {
                    signature: signature.clone(),
                    rules: Vec::new(),
                });
                self.partition_index.insert(signature, slot);
                slot
            }
        };
        self.partitions[slot].rules.push(id);
        self.rules.push(rule);
        id
    }

    /// Symbols that occur in predicate position, in id order.
    pub fn predicates(&self) -> Vec<SymbolId> {
        let set: BTreeSet<SymbolId> = self
            .rules
            .iter()
            .flat_map(|r| r.atoms())
            .filter_map(|a| a.predicate().symbol())
            .collect();
        set.into_iter().collect()
    }

    /// Symbols that occur as an argument of some fact, in id order.
    pub fn constants(&self) -> Vec<SymbolId> {
        let set: BTreeSet<SymbolId> = self
            .facts()
            .flat_map(|r| r.head.args().iter().filter_map(Term::symbol))
            .collect();
        set.into_iter().collect()
    }

    pub fn parameterized_rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules
            .iter()
            .filter(move |r| r.is_parameterized(&self.vocab))
    }

    /// One clause per line, reparseable by [`parse_kb`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&RuleDisplay::new(rule, &self.vocab).to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for KnowledgeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_group_identical_shapes() {
        let kb = parse_kb(
            "p(a, b).\nq(c, d).\nr(a).\n\
             p(X, Y) :- q(Y, X).\nr(X, Y) :- p(Y, X).\np(X, Y) :- q(X, Z), q(Z, Y).",
        )
        .unwrap();
        let sizes: Vec<usize> = kb.partitions().iter().map(|p| p.rules.len()).collect();
        assert_eq!(sizes, [2, 1, 2, 1]);
        for partition in kb.partitions() {
            for &id in &partition.rules {
                assert_eq!(kb.rule(id).signature(), partition.signature);
            }
        }
    }

    #[test]
    fn duplicate_facts_are_dropped() {
        let mut vocab = Vocabulary::new();
        let p = vocab.intern("p");
        let a = vocab.intern("a");
        let kb = KnowledgeBase::from_facts(vocab, [Atom::ground(&[p, a]), Atom::ground(&[p, a])]);
        assert_eq!(kb.len(), 1);
        assert!(kb.contains_fact(&[p, a]));
    }

    #[test]
    fn predicates_and_constants() {
        let kb = parse_kb("p(a, b).\nq(b, c).\nr(X) :- p(X, a).").unwrap();
        let names = |ids: Vec<SymbolId>| -> Vec<String> {
            ids.into_iter().map(|s| kb.vocab().name(s).into()).collect()
        };
        assert_eq!(names(kb.predicates()), ["p", "q", "r"]);
        assert_eq!(names(kb.constants()), ["a", "b", "c"]);
    }
}
