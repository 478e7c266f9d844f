use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, SymbolId};

/// Attempts per corruption before giving up.
pub const MAX_TRIES: usize = 1000;

/// A ground atom with its target score.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingExample {
    pub atom: Vec<SymbolId>,
    pub target: bool,
}

impl TrainingExample {
    pub fn positive(atom: Vec<SymbolId>) -> Self {
        TrainingExample { atom, target: true }
    }
}

/// Which arguments a corruption replaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    First,
    Second,
    Both,
}

/// Form of the `c`-th corruption of the fact at `position` in its batch:
/// first, second, both, then alternating first/second.
pub fn corruption_form(c: usize, position: usize) -> Corruption {
    match c {
        0 => Corruption::First,
        1 => Corruption::Second,
        2 => Corruption::Both,
        _ if (c - 3 + position) % 2 == 0 => Corruption::First,
        _ => Corruption::Second,
    }
}

/// `ratio` negatives for `fact`, sampled from `constants` and rejected while
/// they are facts of `kb`.
pub fn sample_corruptions<R: Rng + ?Sized>(
    fact: &[SymbolId],
    position: usize,
    kb: &KnowledgeBase,
    constants: &[SymbolId],
    ratio: usize,
    rng: &mut R,
) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::with_capacity(ratio);
    if ratio == 0 {
        return Ok(out);
    }
    if constants.is_empty() || fact.len() < 2 {
        return Err(Error::CorruptionExhausted(0));
    }
    let last = fact.len() - 1;
    for c in 0..ratio {
        let positions: &[usize] = match corruption_form(c, position) {
            Corruption::First => &[1],
            Corruption::Second if last >= 2 => &[2],
            Corruption::Second => &[1],
            Corruption::Both if last >= 2 => &[1, 2],
            Corruption::Both => &[1],
        };
        let mut found = None;
        for _ in 0..MAX_TRIES {
            let mut atom = fact.to_vec();
            for &p in positions {
                atom[p] = *constants.choose(rng).unwrap();
            }
            if !kb.contains_fact(&atom) {
                found = Some(atom);
                break;
            }
        }
        match found {
            Some(atom) => out.push(TrainingExample { atom, target: false }),
            None => return Err(Error::CorruptionExhausted(MAX_TRIES)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_kb;
    use alloc::collections::BTreeSet;
    use alloc::format;
    use alloc::string::String;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_forms() {
        let kb = parse_kb("r(a, b).\nr(c, d).\nr(e, f).").unwrap();
        let fact: Vec<SymbolId> = ["r", "a", "b"].iter().map(|n| kb.vocab().get(n).unwrap()).collect();
        let constants = kb.constants();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let neg = sample_corruptions(&fact, 0, &kb, &constants, 3, &mut rng).unwrap();
            assert_eq!(neg.len(), 3);
            assert!(neg.iter().all(|e| !e.target && !kb.contains_fact(&e.atom)));
            assert_eq!(neg[0].atom[2], fact[2]);
            assert_eq!(neg[1].atom[1], fact[1]);
            assert!(neg.iter().all(|e| e.atom[0] == fact[0]));
        }
        assert!(sample_corruptions(&fact, 0, &kb, &constants, 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn fourth_form_alternates() {
        assert_eq!(corruption_form(3, 0), Corruption::First);
        assert_eq!(corruption_form(3, 1), Corruption::Second);
        assert_eq!(corruption_form(4, 0), Corruption::Second);
    }

    #[test]
    fn exhausted_pool_is_an_error() {
        let kb = parse_kb("r(a, a).").unwrap();
        let fact = kb.rules()[0].head.symbols().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_corruptions(&fact, 0, &kb, &kb.constants(), 1, &mut rng).unwrap_err();
        assert_eq!(err, Error::CorruptionExhausted(MAX_TRIES));
    }

    #[test]
    fn resampling_gives_fresh_sets() {
        let mut text = String::from("r(c0, c1).\n");
        for i in 2..100 {
            text.push_str(&format!("s(c{i}, c{i}).\n"));
        }
        let kb = parse_kb(&text).unwrap();
        let fact = kb.rules()[0].head.symbols().unwrap();
        let constants = kb.constants();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sets: Vec<Vec<TrainingExample>> = (0..20)
            .map(|_| sample_corruptions(&fact, 0, &kb, &constants, 4, &mut rng).unwrap())
            .collect();
        let mut repeats = 0;
        for w in sets.windows(2) {
            let a: BTreeSet<_> = w[0].iter().map(|e| e.atom.clone()).collect();
            let b: BTreeSet<_> = w[1].iter().map(|e| e.atom.clone()).collect();
            repeats += a.intersection(&b).count();
        }
        assert!((repeats as f64) / (19.0 * 4.0) < 0.05);
    }
}
