//! Differentiable backward chaining.
//!
//! `or` tries every rule whose head has the goal's arity, `and` proves a
//! rule body left to right, and `unify` compares non-variable symbols with
//! an RBF kernel instead of equality. The search is written once over a
//! [`Backend`] that decides what a success score is: a node in a
//! [`Graph`](crate::graph::Graph) ([`GraphBackend`]) or a plain number
//! that remembers which kernel produced it ([`NumericBackend`]).

mod backend;
mod batch;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use backend::{GraphBackend, Leaf, NumericBackend, Witness};
pub use batch::{batch_unify, prove_batch, CompiledProof, GoalSpec, KernelTable};

use crate::error::{Error, Result};
use crate::graph::RowRef;
use crate::kb::render::write_symbol;
use crate::kb::{Atom, KnowledgeBase, Rule, RuleId, SymbolId, Term, Var, Vocabulary};
use crate::math;

/// A term during proving: a variable or a row reference (a fixed symbol or
/// an input slot of a compiled goal).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProofTerm {
    Var(Var),
    Sym(RowRef),
}

impl ProofTerm {
    pub fn sym(s: SymbolId) -> Self {
        ProofTerm::Sym(RowRef::Sym(s))
    }

    /// Terms of a ground goal.
    pub fn ground(symbols: &[SymbolId]) -> Vec<ProofTerm> {
        symbols.iter().map(|&s| ProofTerm::sym(s)).collect()
    }

    /// Terms of a stored atom, with its variables moved into `scope`.
    pub fn atom(atom: &Atom, scope: u32) -> Vec<ProofTerm> {
        atom.terms.iter().map(|&t| rename(t, scope)).collect()
    }

    /// Goal whose positions are input slots `0..len`.
    pub fn inputs(len: usize) -> Vec<ProofTerm> {
        (0..len as u32).map(|i| ProofTerm::Sym(RowRef::Input(i))).collect()
    }
}

#[inline]
fn rename(t: Term, scope: u32) -> ProofTerm {
    match t {
        Term::Sym(s) => ProofTerm::sym(s),
        Term::Var(v) => ProofTerm::Var(Var::new(scope, v.index)),
    }
}

/// Ordered variable bindings. A variable is bound at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: Vec<(Var, ProofTerm)>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, v: Var) -> Option<ProofTerm> {
        self.bindings.iter().find(|(w, _)| *w == v).map(|(_, t)| *t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, ProofTerm)> + '_ {
        self.bindings.iter().copied()
    }

    /// Adds `v/t`. Panics in debug builds if `v` is already bound.
    pub fn bind(&mut self, v: Var, t: ProofTerm) {
        debug_assert!(self.get(v).is_none());
        self.bindings.push((v, t));
    }

    /// Follows binding chains until an unbound variable or a symbol.
    pub fn resolve(&self, mut t: ProofTerm) -> ProofTerm {
        while let ProofTerm::Var(v) = t {
            match self.get(v) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }
}

/// Applies `psi` to every variable of `atom` (chains are followed, so the
/// result is a fixed point).
pub fn substitute(atom: &[ProofTerm], psi: &Substitution) -> Vec<ProofTerm> {
    atom.iter().map(|&t| psi.resolve(t)).collect()
}

/// One rule application on the path to a proof state.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    /// Remaining depth when the rule was applied.
    pub depth: usize,
    pub rule: RuleId,
    /// The (sub)goal the rule head was unified with.
    pub goal: Vec<ProofTerm>,
    /// Kernel values of the non-variable pairs compared by this unification.
    pub kernels: Vec<(RowRef, RowRef, f64)>,
    /// Proof success after this step.
    pub success: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProofState<S> {
    pub subs: Substitution,
    pub success: S,
    /// Non-ground rules already applied on this branch.
    pub applied: Vec<RuleId>,
    pub trace: Vec<TraceStep>,
}

impl<S> ProofState<S> {
    pub fn new(success: S) -> Self {
        ProofState {
            subs: Substitution::new(),
            success,
            applied: Vec::new(),
            trace: Vec::new(),
        }
    }
}

/// What a success score is and how scores combine.
pub trait Backend {
    type Score: Clone;

    /// Called once before each top-level proof.
    fn begin(&mut self) {}

    fn constant(&mut self, v: f64) -> Self::Score;

    /// `min(upstream, k(a1, b1), k(a2, b2), ...)`, or forced to 0 when
    /// `masked`. Returning `None` drops the state (used for pruning states
    /// that can no longer beat the best proof found so far).
    fn unify_score(
        &mut self,
        upstream: &Self::Score,
        pairs: &[(RowRef, RowRef)],
        masked: bool,
    ) -> Option<Self::Score>;

    /// Maximum over final states; the first of equal maxima wins.
    fn aggregate(&mut self, finals: &[Self::Score]) -> Self::Score;

    fn value(&mut self, s: &Self::Score) -> f64;

    /// Kernel value, used only for traces.
    fn kernel(&mut self, a: RowRef, b: RowRef) -> f64;

    /// Called for every final state at the top level.
    fn offer_final(&mut self, _s: &Self::Score) {}
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProveOptions {
    pub depth: usize,
    /// Keep only the `K` best states returned by each `or` call inside
    /// `and` (per upstream state). `None` proves exactly.
    pub kmax: Option<usize>,
    /// Fact whose unification success is forced to 0.
    pub mask: Option<RuleId>,
    pub trace: bool,
}

impl ProveOptions {
    pub fn new(depth: usize) -> Self {
        ProveOptions {
            depth,
            kmax: None,
            mask: None,
            trace: false,
        }
    }

    pub fn kmax(mut self, k: Option<usize>) -> Self {
        self.kmax = k;
        self
    }

    pub fn mask(mut self, fact: Option<RuleId>) -> Self {
        self.mask = fact;
        self
    }

    pub fn trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("proof depth must be at least 1".into()));
        }
        if self.kmax == Some(0) {
            return Err(Error::Config("kmax must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProveStats {
    /// Head/goal unifications attempted (arity-compatible, not skipped by
    /// the rule-reuse check).
    pub unifications: u64,
    /// States that reached the top level.
    pub finals: u64,
}

impl core::ops::AddAssign for ProveStats {
    fn add_assign(&mut self, o: Self) {
        self.unifications += o.unifications;
        self.finals += o.finals;
    }
}

#[derive(Clone, Debug)]
pub struct ProofOutcome<S> {
    /// Max over final states, or the `1e-10` sentinel if every proof failed.
    pub success: S,
    /// Final states in enumeration order (pruned states are absent).
    pub finals: Vec<ProofState<S>>,
    /// Index into `finals` of the maximal state.
    pub best: Option<usize>,
    pub stats: ProveStats,
}

impl<S> ProofOutcome<S> {
    pub fn best_state(&self) -> Option<&ProofState<S>> {
        self.best.map(|i| &self.finals[i])
    }
}

struct Search<'a, B: Backend> {
    kb: &'a KnowledgeBase,
    backend: &'a mut B,
    opts: &'a ProveOptions,
    next_scope: u32,
    stats: ProveStats,
    error: Option<Error>,
    pairs: Vec<(RowRef, RowRef)>,
    fresh: Vec<(Var, ProofTerm)>,
}

type Sink<'s, 'a, B> = dyn FnMut(&mut Search<'a, B>, ProofState<<B as Backend>::Score>) + 's;

impl<'a, B: Backend> Search<'a, B> {
    fn or(&mut self, goal: &[ProofTerm], d: usize, s: &ProofState<B::Score>, out: &mut Sink<'_, 'a, B>) {
        if d == 0 {
            // and(_, 0, _) fails for every rule, facts included.
            return;
        }
        let kb = self.kb;
        for rule in kb.rules() {
            if rule.head.terms.len() != goal.len() {
                continue;
            }
            if !rule.ground && s.applied.contains(&rule.id) {
                continue;
            }
            let scope = if rule.ground {
                0
            } else {
                self.next_scope += 1;
                self.next_scope
            };
            self.stats.unifications += 1;
            let masked = self.opts.mask == Some(rule.id);
            let Some(mut next) = self.unify_rule(rule, scope, goal, s, masked) else {
                continue;
            };
            if !rule.ground {
                next.applied.push(rule.id);
            }
            if self.opts.trace {
                let kernels = self
                    .pairs
                    .clone()
                    .into_iter()
                    .map(|(a, b)| (a, b, self.backend.kernel(a, b)))
                    .collect();
                let success = self.backend.value(&next.success);
                next.trace.push(TraceStep {
                    depth: d,
                    rule: rule.id,
                    goal: goal.to_vec(),
                    kernels,
                    success,
                });
            }
            self.and(&rule.body, scope, d, next, out);
        }
    }

    fn and(
        &mut self,
        body: &[Atom],
        scope: u32,
        d: usize,
        s: ProofState<B::Score>,
        out: &mut Sink<'_, 'a, B>,
    ) {
        if d == 0 {
            return;
        }
        let Some((first, rest)) = body.split_first() else {
            out(self, s);
            return;
        };
        let goal: Vec<ProofTerm> = first
            .terms
            .iter()
            .map(|&t| s.subs.resolve(rename(t, scope)))
            .collect();
        match self.opts.kmax {
            None => self.or(&goal, d - 1, &s, &mut |this: &mut Self, next| {
                this.and(rest, scope, d, next, out)
            }),
            Some(k) => {
                let mut found = Vec::new();
                self.or(&goal, d - 1, &s, &mut |_: &mut Self, next| found.push(next));
                let found = self.top_k(found, k);
                for next in found {
                    self.and(rest, scope, d, next, out);
                }
            }
        }
    }

    /// The `k` highest-scoring states, kept in their original order; equal
    /// scores prefer the earlier state.
    fn top_k(&mut self, states: Vec<ProofState<B::Score>>, k: usize) -> Vec<ProofState<B::Score>> {
        if states.len() <= k {
            return states;
        }
        let values: Vec<f64> = states.iter().map(|s| self.backend.value(&s.success)).collect();
        let mut order: Vec<usize> = (0..states.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut keep = alloc::vec![false; states.len()];
        for &i in &order[..k] {
            keep[i] = true;
        }
        states
            .into_iter()
            .zip(keep)
            .filter_map(|(s, k)| k.then_some(s))
            .collect()
    }

    fn unify_rule(
        &mut self,
        rule: &Rule,
        scope: u32,
        goal: &[ProofTerm],
        s: &ProofState<B::Score>,
        masked: bool,
    ) -> Option<ProofState<B::Score>> {
        let head = rule.head.terms.iter().map(|&t| rename(t, scope));
        self.unify_terms(head, goal, s, masked)
    }

    fn unify_terms(
        &mut self,
        head: impl Iterator<Item = ProofTerm>,
        goal: &[ProofTerm],
        s: &ProofState<B::Score>,
        masked: bool,
    ) -> Option<ProofState<B::Score>> {
        self.pairs.clear();
        self.fresh.clear();
        let mut len = 0;
        for (h, &g) in head.zip(goal) {
            len += 1;
            let hr = resolve_in(&s.subs, &self.fresh, h);
            let gr = resolve_in(&s.subs, &self.fresh, g);
            match (hr, gr) {
                (ProofTerm::Var(a), ProofTerm::Var(b)) => {
                    if a != b {
                        self.fresh.push((a, ProofTerm::Var(b)));
                    }
                }
                (ProofTerm::Var(a), t) => self.fresh.push((a, t)),
                (t, ProofTerm::Var(b)) => self.fresh.push((b, t)),
                (ProofTerm::Sym(x), ProofTerm::Sym(y)) => {
                    if matches!(h, ProofTerm::Sym(_)) && matches!(g, ProofTerm::Sym(_)) {
                        self.pairs.push((x, y));
                    } else if x != y {
                        // A bound variable meets a different symbol.
                        if matches!(x, RowRef::Input(_)) || matches!(y, RowRef::Input(_)) {
                            self.error.get_or_insert(Error::Config(
                                "goal shape needs a binding check that depends on the input symbols"
                                    .into(),
                            ));
                        }
                        return None;
                    }
                }
            }
        }
        if len != goal.len() {
            return None;
        }
        let success = self.backend.unify_score(&s.success, &self.pairs, masked)?;
        let mut subs = s.subs.clone();
        for &(v, t) in &self.fresh {
            subs.bind(v, t);
        }
        Some(ProofState {
            subs,
            success,
            applied: s.applied.clone(),
            trace: s.trace.clone(),
        })
    }
}

fn resolve_in(subs: &Substitution, fresh: &[(Var, ProofTerm)], mut t: ProofTerm) -> ProofTerm {
    while let ProofTerm::Var(v) = t {
        match fresh.iter().find(|(w, _)| *w == v) {
            Some(&(_, next)) => t = next,
            None => match subs.get(v) {
                Some(next) => t = next,
                None => break,
            },
        }
    }
    t
}

/// Unifies two term lists under state `s`. `None` is FAIL (arity mismatch
/// or a bound variable meeting a different symbol).
pub fn unify<B: Backend>(
    backend: &mut B,
    h: &[ProofTerm],
    g: &[ProofTerm],
    s: &ProofState<B::Score>,
) -> Option<ProofState<B::Score>> {
    if h.len() != g.len() {
        return None;
    }
    let kb = KnowledgeBase::new();
    let opts = ProveOptions::new(1);
    let mut search = Search {
        kb: &kb,
        backend,
        opts: &opts,
        next_scope: 0,
        stats: ProveStats::default(),
        error: None,
        pairs: Vec::new(),
        fresh: Vec::new(),
    };
    search.unify_terms(h.iter().copied(), g, s, false)
}

/// `or(goal, d, s)`: every state reachable by applying a rule to `goal`.
pub fn or<B: Backend>(
    kb: &KnowledgeBase,
    backend: &mut B,
    goal: &[ProofTerm],
    opts: &ProveOptions,
    s: &ProofState<B::Score>,
) -> Vec<ProofState<B::Score>> {
    let mut search = Search::start(kb, backend, opts, goal);
    let mut out = Vec::new();
    search.or(goal, opts.depth, s, &mut |_: &mut Search<'_, B>, st| out.push(st));
    out
}

/// `and(body, d, s)` for stored rule-body atoms whose variables live in
/// `scope`.
pub fn and<B: Backend>(
    kb: &KnowledgeBase,
    backend: &mut B,
    body: &[Atom],
    scope: u32,
    opts: &ProveOptions,
    s: ProofState<B::Score>,
) -> Vec<ProofState<B::Score>> {
    let mut search = Search::start(kb, backend, opts, &[]);
    search.next_scope = search.next_scope.max(scope);
    let mut out = Vec::new();
    search.and(body, scope, opts.depth, s, &mut |_: &mut Search<'_, B>, st| out.push(st));
    out
}

impl<'a, B: Backend> Search<'a, B> {
    fn start(kb: &'a KnowledgeBase, backend: &'a mut B, opts: &'a ProveOptions, goal: &[ProofTerm]) -> Self {
        let top = goal
            .iter()
            .filter_map(|t| match t {
                ProofTerm::Var(v) => Some(v.scope),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Search {
            kb,
            backend,
            opts,
            next_scope: top,
            stats: ProveStats::default(),
            error: None,
            pairs: Vec::new(),
        fresh: Vec::new(),
        }
    }
}

/// Proves `goal` to depth `opts.depth` and aggregates the final states.
pub fn prove_with<B: Backend>(
    kb: &KnowledgeBase,
    goal: &[ProofTerm],
    opts: &ProveOptions,
    backend: &mut B,
) -> Result<ProofOutcome<B::Score>> {
    opts.validate()?;
    backend.begin();
    let one = backend.constant(1.0);
    let mut search = Search::start(kb, backend, opts, goal);
    let mut finals = Vec::new();
    search.or(goal, opts.depth, &ProofState::new(one), &mut |this: &mut Search<'_, B>, st| {
        this.backend.offer_final(&st.success);
        this.stats.finals += 1;
        finals.push(st);
    });
    if let Some(e) = search.error.take() {
        return Err(e);
    }
    let stats = search.stats;
    if finals.is_empty() {
        return Ok(ProofOutcome {
            success: backend.constant(math::FLOOR),
            finals,
            best: None,
            stats,
        });
    }
    let scores: Vec<B::Score> = finals.iter().map(|s| s.success.clone()).collect();
    let success = backend.aggregate(&scores);
    let values: Vec<f64> = scores.iter().map(|s| backend.value(s)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if !(v > b) => best,
            _ if v.is_nan() => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i);
    Ok(ProofOutcome {
        success,
        finals,
        best,
        stats,
    })
}

/// Numeric proof of a ground goal: the success score and its witness.
pub fn ntp_prove(
    kb: &KnowledgeBase,
    goal: &[SymbolId],
    emb: &crate::graph::EmbeddingMatrix,
    opts: &ProveOptions,
) -> Result<ProofOutcome<Witness>> {
    let mut backend = NumericBackend::new(emb);
    prove_with(kb, &ProofTerm::ground(goal), opts, &mut backend)
}

/// Human-readable term rendering.
pub struct TermDisplay<'a> {
    term: ProofTerm,
    vocab: &'a Vocabulary,
    names: &'a [String],
}

impl<'a> TermDisplay<'a> {
    /// Variables of scope 0 are printed with `names`; renamed rule
    /// variables as `_G<scope>_<index>`.
    pub fn new(term: ProofTerm, vocab: &'a Vocabulary, names: &'a [String]) -> Self {
        TermDisplay { term, vocab, names }
    }
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.term {
            ProofTerm::Sym(RowRef::Sym(s)) => write_symbol(f, self.vocab.name(s)),
            ProofTerm::Sym(RowRef::Input(i)) => write!(f, "#in{i}"),
            ProofTerm::Var(v) if v.scope == 0 && (v.index as usize) < self.names.len() => {
                f.write_str(&self.names[v.index as usize])
            }
            ProofTerm::Var(v) => write!(f, "_G{}_{}", v.scope, v.index),
        }
    }
}
