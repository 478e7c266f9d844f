//! Filtered ranking metrics, average precision and rule decoding.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::graph::EmbeddingMatrix;
use crate::kb::{KnowledgeBase, Rule, RuleDisplay, RuleId, SymbolId, Term};
use crate::math;

/// Scores a list of ground atoms.
pub type Scorer<'s> = dyn FnMut(&[Vec<SymbolId>]) -> Result<Vec<f64>> + 's;

/// Ranks of `fact` against its corruptions at argument positions 1 and 2.
///
/// Candidates replace one argument by every entity in `entities`; those
/// for which `known` holds are filtered out. Ties count against the true
/// fact: rank = 1 + #candidates scoring at least as high.
pub fn rank_fact(
    fact: &[SymbolId],
    known: &dyn Fn(&[SymbolId]) -> bool,
    entities: &[SymbolId],
    scorer: &mut Scorer<'_>,
) -> Result<(usize, usize)> {
    if fact.len() != 3 {
        return Err(Error::Config("ranking needs binary facts".into()));
    }
    let mut ranks = [0usize; 2];
    for (side, rank) in ranks.iter_mut().enumerate() {
        let pos = side + 1;
        let mut atoms = alloc::vec![fact.to_vec()];
        for &e in entities {
            if e == fact[pos] {
                continue;
            }
            let mut c = fact.to_vec();
            c[pos] = e;
            if !known(&c) {
                atoms.push(c);
            }
        }
        let scores = scorer(&atoms)?;
        if scores.len() != atoms.len() {
            return Err(Error::Scorer("scorer returned the wrong number of scores".into()));
        }
        let truth = scores[0];
        *rank = 1 + scores[1..].iter().filter(|&&s| s >= truth).count();
    }
    Ok((ranks[0], ranks[1]))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankingResult {
    /// `(first-argument rank, second-argument rank)` per test fact.
    pub ranks: Vec<(usize, usize)>,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl RankingResult {
    /// Aggregates with both sides of every fact pooled.
    pub fn from_ranks(ranks: Vec<(usize, usize)>) -> Self {
        let pooled: Vec<usize> = ranks.iter().flat_map(|&(a, b)| [a, b]).collect();
        let n = pooled.len().max(1) as f64;
        let hits = |m: usize| pooled.iter().filter(|&&r| r <= m).count() as f64 / n;
        RankingResult {
            mrr: pooled.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
            hits1: hits(1),
            hits3: hits(3),
            hits10: hits(10),
            ranks,
        }
    }
}

/// Filtered ranking of every test fact.
pub fn evaluate_ranking(
    facts: &[Vec<SymbolId>],
    known: &dyn Fn(&[SymbolId]) -> bool,
    entities: &[SymbolId],
    scorer: &mut Scorer<'_>,
) -> Result<RankingResult> {
    let ranks = facts
        .iter()
        .map(|f| rank_fact(f, known, entities, scorer))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankingResult::from_ranks(ranks))
}

/// Average precision: mean over positives of the precision at their
/// position in descending score order (stable for equal scores).
pub fn auc_pr(scores: &[(f64, bool)]) -> Result<f64> {
    let positives = scores.iter().filter(|(_, y)| *y).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].0.total_cmp(&scores[a].0));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &idx) in order.iter().enumerate() {
        if scores[idx].1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// A parameterized rule read back in terms of known predicates.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedRule {
    pub rule: RuleId,
    /// `(parameter, nearest known predicate, kernel value)` per distinct
    /// parameter symbol, in order of first occurrence.
    pub slots: Vec<(SymbolId, SymbolId, f64)>,
    /// Minimum kernel value over the slots.
    pub confidence: f64,
    /// The rule with every parameter replaced by its decoding.
    pub decoded: Rule,
    /// `decoded` rendered as `head(X,Y) :- body(X,Z), ...`.
    pub text: String,
}

impl fmt::Display for DecodedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} {}", self.confidence, self.text)
    }
}

/// Maps each parameter to its closest known predicate and sorts rules by
/// confidence, highest first.
pub fn decode_rules(kb: &KnowledgeBase, emb: &EmbeddingMatrix, mu: f64) -> Result<Vec<DecodedRule>> {
    let vocab = kb.vocab();
    let rules: Vec<&Rule> = kb.parameterized_rules().collect();
    if rules.is_empty() {
        return Ok(Vec::new());
    }
    let known: Vec<SymbolId> = kb
        .predicates()
        .into_iter()
        .filter(|&p| !vocab.is_parameterized(p))
        .collect();
    if known.is_empty() {
        return Err(Error::NoKnownPredicates);
    }
    let nearest = |p: SymbolId| -> (SymbolId, f64) {
        let mut best = (known[0], f64::NEG_INFINITY);
        for &q in &known {
            let k = math::rbf(emb.row(p), emb.row(q), mu);
            if k > best.1 {
                best = (q, k);
            }
        }
        best
    };
    let mut out = Vec::with_capacity(rules.len());
    for rule in rules {
        let mut seen = BTreeSet::new();
        let mut slots = Vec::new();
        for t in rule.atoms().flat_map(|a| a.terms.iter()) {
            if let Term::Sym(s) = *t {
                if vocab.is_parameterized(s) && seen.insert(s) {
                    let (q, k) = nearest(s);
                    slots.push((s, q, k));
                }
            }
        }
        let confidence = slots.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
        let mut decoded = rule.clone();
        for atom in core::iter::once(&mut decoded.head).chain(decoded.body.iter_mut()) {
            for t in &mut atom.terms {
                if let Term::Sym(s) = *t {
                    if let Some(&(_, q, _)) = slots.iter().find(|slot| slot.0 == s) {
                        *t = Term::Sym(q);
                    }
                }
            }
        }
        let text = RuleDisplay::new(&decoded, vocab).compact().to_string();
        out.push(DecodedRule {
            rule: rule.id,
            slots,
            confidence,
            decoded,
            text,
        });
    }
    out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    Ok(out)
}
