//! Plain symbolic backward chaining.
//!
//! Same search as the prover (rule order, depth accounting, one use of
//! each non-ground rule per branch) but unification demands equal symbols.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kb::{Atom, KnowledgeBase, RuleId, Term, Var};

/// Variable bindings; chains are resolved on lookup.
pub type Bindings = BTreeMap<Var, Term>;

#[derive(Clone, Debug)]
struct State {
    subs: Bindings,
    applied: Vec<RuleId>,
}

fn walk(subs: &Bindings, mut t: Term) -> Term {
    while let Term::Var(v) = t {
        match subs.get(&v) {
            Some(&next) => t = next,
            None => break,
        }
    }
    t
}

fn fresh(t: Term, scope: u32) -> Term {
    match t {
        Term::Var(v) => Term::Var(Var::new(scope, v.index)),
        s => s,
    }
}

struct Prover<'a> {
    kb: &'a KnowledgeBase,
    scope: u32,
}

impl Prover<'_> {
    fn unify(&self, head: &[Term], goal: &[Term], s: &State) -> Option<State> {
        if head.len() != goal.len() {
            return None;
        }
        let mut next = s.clone();
        for (&h, &g) in head.iter().zip(goal) {
            match (walk(&next.subs, h), walk(&next.subs, g)) {
                (Term::Var(a), Term::Var(b)) if a == b => {}
                (Term::Var(a), t) | (t, Term::Var(a)) => {
                    next.subs.insert(a, t);
                }
                (x, y) if x == y => {}
                _ => return None,
            }
        }
        Some(next)
    }

    fn or(&mut self, goal: &[Term], d: usize, s: &State) -> Vec<State> {
        let mut out = Vec::new();
        if d == 0 {
            return out;
        }
        for rule in self.kb.rules() {
            if !rule.ground && s.applied.contains(&rule.id) {
                continue;
            }
            self.scope += 1;
            let scope = self.scope;
            let head: Vec<Term> = rule.head.terms.iter().map(|&t| fresh(t, scope)).collect();
            if let Some(mut next) = self.unify(&head, goal, s) {
                if !rule.ground {
                    next.applied.push(rule.id);
                }
                let body: Vec<Vec<Term>> = rule
                    .body
                    .iter()
                    .map(|a| a.terms.iter().map(|&t| fresh(t, scope)).collect())
                    .collect();
                out.extend(self.and(&body, d, next));
            }
        }
        out
    }

    fn and(&mut self, body: &[Vec<Term>], d: usize, s: State) -> Vec<State> {
        if d == 0 {
            return Vec::new();
        }
        let Some((first, rest)) = body.split_first() else {
            return alloc::vec![s];
        };
        let goal: Vec<Term> = first.iter().map(|&t| walk(&s.subs, t)).collect();
        let mut out = Vec::new();
        for next in self.or(&goal, d - 1, &s) {
            out.extend(self.and(rest, d, next));
        }
        out
    }
}

/// Every successful proof of `goal` up to depth `depth`, as bindings of
/// the goal's own variables (in enumeration order, duplicates kept).
pub fn sym_prove(goal: &Atom, depth: usize, kb: &KnowledgeBase) -> Result<Vec<Bindings>> {
    if depth == 0 {
        return Err(Error::Config("proof depth must be at least 1".into()));
    }
    let top = goal
        .terms
        .iter()
        .filter_map(|t| match t {
            Term::Var(v) => Some(v.scope),
            Term::Sym(_) => None,
        })
        .max()
        .unwrap_or(0);
    let mut prover = Prover { kb, scope: top };
    let start = State {
        subs: Bindings::new(),
        applied: Vec::new(),
    };
    let finals = prover.or(&goal.terms, depth, &start);
    Ok(finals
        .into_iter()
        .map(|st| {
            goal.terms
                .iter()
                .filter_map(|t| match *t {
                    Term::Var(v) => Some((v, walk(&st.subs, Term::Var(v)))),
                    Term::Sym(_) => None,
                })
                .collect()
        })
        .collect())
}

pub fn sym_provable(goal: &Atom, depth: usize, kb: &KnowledgeBase) -> Result<bool> {
    Ok(!sym_prove(goal, depth, kb)?.is_empty())
}
