use std::collections::BTreeSet;

use ntp_core::datasets::{gen_synthetic_kb, SyntheticConfig};
use ntp_core::kb::{parse_kb, split_dataset, Atom, KnowledgeBase, SymbolId, Term, Var, Vocabulary};
use ntp_core::oracle::sym_provable;
use proptest::prelude::*;

/// Ground atoms derivable by naive forward chaining to a fixpoint.
fn closure(kb: &KnowledgeBase) -> BTreeSet<Vec<SymbolId>> {
    let mut known: BTreeSet<Vec<SymbolId>> = kb.facts().filter_map(|r| r.head.symbols()).collect();
    loop {
        let mut new = Vec::new();
        for rule in kb.rules().iter().filter(|r| !r.is_fact()) {
            let mut envs: Vec<Vec<(Var, SymbolId)>> = vec![Vec::new()];
            for atom in &rule.body {
                let mut next = Vec::new();
                for env in &envs {
                    'fact: for f in &known {
                        if f.len() != atom.terms.len() {
                            continue;
                        }
                        let mut env = env.clone();
                        for (t, &s) in atom.terms.iter().zip(f) {
                            match *t {
                                Term::Sym(x) if x != s => continue 'fact,
                                Term::Sym(_) => {}
                                Term::Var(v) => match env.iter().find(|b| b.0 == v) {
                                    Some(&(_, y)) if y != s => continue 'fact,
                                    Some(_) => {}
                                    None => env.push((v, s)),
                                },
                            }
                        }
                        next.push(env);
                    }
                }
                envs = next;
            }
            for env in envs {
                let head: Option<Vec<SymbolId>> = rule
                    .head
                    .terms
                    .iter()
                    .map(|t| match *t {
                        Term::Sym(s) => Some(s),
                        Term::Var(v) => env.iter().find(|b| b.0 == v).map(|b| b.1),
                    })
                    .collect();
                if let Some(h) = head {
                    if !known.contains(&h) {
                        new.push(h);
                    }
                }
            }
        }
        if new.is_empty() {
            return known;
        }
        known.extend(new);
    }
}

fn config() -> impl Strategy<Value = (SyntheticConfig, u64)> {
    (2usize..7, 1usize..4, 1usize..25, 0usize..5, 1usize..4, 1usize..4, any::<u64>()).prop_map(
        |(constants, predicates, facts, rules, max_body, depth, seed)| {
            let cfg = SyntheticConfig {
                constants,
                predicates,
                facts,
                rules,
                max_body,
                depth,
                goals: 15,
                ..SyntheticConfig::default()
            };
            (cfg, seed)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn render_parse_roundtrip((cfg, seed) in config()) {
        let kb = gen_synthetic_kb(&cfg, seed).unwrap().kb;
        let text = kb.render();
        let back = parse_kb(&text).unwrap();
        prop_assert_eq!(back.render(), text);
        prop_assert_eq!(back.len(), kb.len());
    }

    #[test]
    fn symbolic_proofs_are_sound((cfg, seed) in config()) {
        let s = gen_synthetic_kb(&cfg, seed).unwrap();
        let derivable = closure(&s.kb);
        for g in &s.provable {
            prop_assert!(derivable.contains(g));
        }
        for f in s.kb.facts() {
            prop_assert!(sym_provable(&f.head, 1, &s.kb).unwrap());
        }
        // A deeper search never loses a proof.
        for g in &s.provable {
            prop_assert!(sym_provable(&Atom::ground(g), cfg.depth + 1, &s.kb).unwrap());
        }
    }

    #[test]
    fn splits_partition_the_facts(n in 3usize..400, a in 1u32..10, b in 0u32..10, c in 0u32..10, seed in any::<u64>()) {
        let total = f64::from(a + b + c);
        let ratios = [f64::from(a) / total, f64::from(b) / total, f64::from(c) / total];
        let facts: Vec<usize> = (0..n).collect();
        if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Ok(());
        }
        let (tr, dv, te) = split_dataset(&facts, ratios, seed).unwrap();
        prop_assert_eq!(tr.len() + dv.len() + te.len(), n);
        let mut all: Vec<usize> = tr.iter().chain(&dv).chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, facts);
        for (part, r) in [(&tr, ratios[0]), (&dv, ratios[1]), (&te, ratios[2])] {
            prop_assert!((part.len() as f64 - r * n as f64).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn vocabulary_is_injective(names in proptest::collection::vec("[a-z][a-zA-Z0-9_]{0,6}", 1..40)) {
        let mut v = Vocabulary::new();
        let ids: Vec<SymbolId> = names.iter().map(|n| v.intern(n)).collect();
        for (n, &id) in names.iter().zip(&ids) {
            prop_assert_eq!(v.name(id), n.as_str());
            prop_assert_eq!(v.get(n), Some(id));
        }
        let distinct: BTreeSet<&String> = names.iter().collect();
        let distinct_ids: BTreeSet<SymbolId> = ids.iter().copied().collect();
        prop_assert_eq!(distinct.len(), distinct_ids.len());
        prop_assert_eq!(v.len(), distinct.len());
    }
}
