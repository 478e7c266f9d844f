use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Atom, KnowledgeBase, RuleId, SymbolId, Term, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateArg {
    Var(u32),
    Const(String),
}

/// A skeleton atom whose predicate is placeholder `#slot`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateAtom {
    pub slot: u32,
    pub args: Vec<TemplateArg>,
}

/// `count` copies of a rule skeleton. Equal placeholder numbers within one
/// skeleton share one trainable predicate representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleTemplate {
    pub count: u32,
    pub head: TemplateAtom,
    pub body: Vec<TemplateAtom>,
    pub var_names: Vec<String>,
    /// Number of distinct placeholders, `#1..=#slots`.
    pub slots: u32,
}

impl RuleTemplate {
    pub fn new(
        count: u32,
        head: TemplateAtom,
        body: Vec<TemplateAtom>,
        var_names: Vec<String>,
    ) -> Result<Self, String> {
        if count == 0 {
            return Err("count must be positive".into());
        }
        let used: BTreeSet<u32> = core::iter::once(&head)
            .chain(body.iter())
            .map(|a| a.slot)
            .collect();
        let slots = used.len() as u32;
        if used.iter().copied().ne(1..=slots) {
            return Err(format!(
                "placeholders must be numbered contiguously from #1, found {used:?}"
            ));
        }
        Ok(RuleTemplate {
            count,
            head,
            body,
            var_names,
            slots,
        })
    }
}

/// Adds `count` parameterized rules per template to `kb`. Every distinct
/// placeholder of every instance gets a fresh trainable symbol named
/// `#<template>.<instance>.<slot>` (all 1-based).
pub fn instantiate_templates(templates: &[RuleTemplate], mut kb: KnowledgeBase) -> KnowledgeBase {
    instantiate_into(templates, &mut kb);
    kb
}

pub(crate) fn instantiate_into(templates: &[RuleTemplate], kb: &mut KnowledgeBase) -> Vec<RuleId> {
    let mut added = Vec::new();
    for (t, template) in templates.iter().enumerate() {
        for instance in 0..template.count {
            let params: Vec<SymbolId> = (1..=template.slots)
                .map(|slot| {
                    kb.vocab_mut()
                        .fresh_parameter(&format!("#{}.{}.{}", t + 1, instance + 1, slot))
                })
                .collect();
            let mut build = |atom: &TemplateAtom| {
                let mut terms = Vec::with_capacity(atom.args.len() + 1);
                terms.push(Term::Sym(params[atom.slot as usize - 1]));
                for arg in &atom.args {
                    terms.push(match arg {
                        TemplateArg::Var(i) => Term::Var(Var::new(0, *i)),
                        TemplateArg::Const(name) => Term::Sym(kb.vocab_mut().intern(name)),
                    });
                }
                Atom::new(terms)
            };
            let head = build(&template.head);
            let body = template.body.iter().map(&mut build).collect();
            added.push(kb.add_rule(head, body, template.var_names.clone()));
        }
    }
    added
}

impl KnowledgeBase {
    /// In-place form of [`instantiate_templates`]; returns the new rule ids.
    pub fn instantiate_templates(&mut self, templates: &[RuleTemplate]) -> Vec<RuleId> {
        instantiate_into(templates, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_kb, parse_templates};

    #[test]
    fn twenty_instances_of_two_slots() {
        let kb = parse_kb("p(a, b).").unwrap();
        let before = kb.vocab().len();
        let templates = parse_templates("20 #1(X, Y) :- #2(X, Y).").unwrap();
        let kb = instantiate_templates(&templates, kb);
        assert_eq!(kb.len(), 21);
        assert_eq!(kb.vocab().len() - before, 40);
        assert_eq!(kb.parameterized_rules().count(), 20);
        let fresh: Vec<_> = kb.vocab().ids().skip(before).collect();
        assert!(fresh.iter().all(|&s| kb.vocab().is_parameterized(s)));
    }

    #[test]
    fn shared_slot_maps_to_one_symbol() {
        let templates = parse_templates("1 #1(X,Y) :- #2(X,Z), #2(Z,Y).").unwrap();
        let kb = instantiate_templates(&templates, KnowledgeBase::new());
        let rule = &kb.rules()[0];
        assert_eq!(kb.vocab().len(), 2);
        assert_eq!(rule.body[0].predicate(), rule.body[1].predicate());
        assert_ne!(rule.head.predicate(), rule.body[0].predicate());
    }

    #[test]
    fn no_templates_is_identity() {
        let kb = parse_kb("p(a, b).\nq(X, Y) :- p(Y, X).").unwrap();
        let out = instantiate_templates(&[], kb.clone());
        assert_eq!(out.render(), kb.render());
        assert_eq!(out.vocab(), kb.vocab());
    }
}
