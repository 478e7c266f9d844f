use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Atom, Vocabulary};
use crate::error::{Error, Result};

/// Column order of a triples file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TripleLayout {
    /// `relation<TAB>arg1<TAB>arg2`
    #[default]
    RelationFirst,
    /// `arg1<TAB>relation<TAB>arg2`
    RelationSecond,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripleLoad {
    pub atoms: Vec<Atom>,
    /// Lines dropped because the same atom appeared earlier.
    pub duplicates: usize,
    /// Two-column (unary) lines dropped in binary-only mode.
    pub skipped_unary: usize,
}

/// Reads tab-separated triples, one ground atom per line. Two-column lines
/// are unary atoms `relation<TAB>arg`; with `binary_only` they are skipped.
pub fn load_triples(
    text: &str,
    layout: TripleLayout,
    binary_only: bool,
    vocab: &mut Vocabulary,
) -> Result<TripleLoad> {
    let mut out = TripleLoad::default();
    let mut seen = alloc::collections::BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let names: Vec<&str> = match (cols.len(), layout) {
            (2, _) if binary_only => {
                out.skipped_unary += 1;
                continue;
            }
            (2, _) => cols,
            (3, TripleLayout::RelationFirst) => cols,
            (3, TripleLayout::RelationSecond) => alloc::vec![cols[1], cols[0], cols[2]],
            (found, _) => return Err(Error::Columns { line: n + 1, found }),
        };
        let symbols: Vec<_> = names.iter().map(|s| vocab.intern(s)).collect();
        if seen.insert(symbols.clone()) {
            out.atoms.push(Atom::ground(&symbols));
        } else {
            out.duplicates += 1;
        }
    }
    Ok(out)
}

/// Largest-remainder sizes for `n` items; ties in the fractional part go to
/// the later split.
fn split_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = libm::floor(*e) as usize;
    }
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    // Fractions that agree to 1e-9 are treated as ties.
    order.sort_by(|&a, &b| {
        let fa = exact[a] - sizes[a] as f64;
        let fb = exact[b] - sizes[b] as f64;
        if (fa - fb).abs() < 1e-9 {
            b.cmp(&a)
        } else {
            fb.total_cmp(&fa)
        }
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Deterministic shuffled split into (train, dev, test).
pub fn split_dataset<T: Clone>(
    facts: &[T],
    ratios: [f64; 3],
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if facts.len() < 3 {
        return Err(Error::Split(alloc::format!(
            "need at least 3 facts, got {}",
            facts.len()
        )));
    }
    if ratios.iter().any(|r| *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Split("ratios must be non-negative and sum to 1".into()));
    }
    let sizes = split_sizes(facts.len(), ratios);
    let mut order: Vec<usize> = (0..facts.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: core::ops::Range<usize>| -> Vec<T> {
        order[range].iter().map(|&i| facts[i].clone()).collect()
    };
    let a = sizes[0];
    let b = a + sizes[1];
    Ok((take(0..a), take(a..b), take(b..facts.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::string::String;

    #[test]
    fn relation_first_triples() {
        let mut vocab = Vocabulary::new();
        let load = load_triples("locatedIn\tgermany\teurope\n", TripleLayout::RelationFirst, true, &mut vocab).unwrap();
        assert_eq!(load.atoms.len(), 1);
        let names: Vec<&str> = load.atoms[0].symbols().unwrap().into_iter().map(|s| vocab.name(s)).collect();
        assert_eq!(names, ["locatedIn", "germany", "europe"]);
    }

    #[test]
    fn relation_second_layout() {
        let mut vocab = Vocabulary::new();
        let load = load_triples("germany\tlocatedIn\teurope", TripleLayout::RelationSecond, true, &mut vocab).unwrap();
        assert_eq!(vocab.name(load.atoms[0].symbols().unwrap()[0]), "locatedIn");
    }

    #[test]
    fn unary_lines_in_binary_mode() {
        let mut vocab = Vocabulary::new();
        let text = "embassy\tusa\tuk\nlargepopulation\tchina\n";
        let load = load_triples(text, TripleLayout::RelationFirst, true, &mut vocab).unwrap();
        assert_eq!((load.atoms.len(), load.skipped_unary), (1, 1));
        let load = load_triples(text, TripleLayout::RelationFirst, false, &mut vocab).unwrap();
        assert_eq!(load.atoms.len(), 2);
        assert_eq!(load.atoms[1].arity(), 1);
    }

    #[test]
    fn duplicates_and_bad_columns() {
        let mut vocab = Vocabulary::new();
        let load = load_triples("r\ta\tb\nr\ta\tb\n\nr\tb\ta\n", TripleLayout::RelationFirst, true, &mut vocab).unwrap();
        assert_eq!((load.atoms.len(), load.duplicates), (2, 1));
        let err = load_triples("r\ta\tb\nr\ta\tb\tc\n", TripleLayout::RelationFirst, true, &mut vocab).unwrap_err();
        assert_eq!(err, Error::Columns { line: 2, found: 4 });
    }

    #[test]
    fn many_rows() {
        let mut text = String::new();
        for i in 0..6529 {
            text.push_str(&alloc::format!("r{}\te{}\te{}\n", i % 49, i % 135, i / 49));
        }
        let mut vocab = Vocabulary::new();
        let load = load_triples(&text, TripleLayout::RelationFirst, true, &mut vocab).unwrap();
        assert_eq!(load.atoms.len(), 6529);
    }

    #[test]
    fn split_sizes_by_largest_remainder() {
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]), [8, 1, 1]);
        // 8548.8 / 1068.6 / 1068.6: train takes the largest remainder, the
        // dev/test tie goes to test.
        assert_eq!(split_sizes(10686, [0.8, 0.1, 0.1]), [8549, 1068, 1069]);
        assert_eq!(split_sizes(3, [0.8, 0.1, 0.1]), [3, 0, 0]);
    }

    #[test]
    fn split_is_deterministic_and_partitions_input() {
        let facts: Vec<u32> = (0..10).collect();
        let (a, b, c) = split_dataset(&facts, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
        assert_eq!(split_dataset(&facts, [0.8, 0.1, 0.1], 7).unwrap(), (a.clone(), b.clone(), c.clone()));
        let union: BTreeSet<u32> = a.iter().chain(&b).chain(&c).copied().collect();
        assert_eq!(union.len(), 10);
        assert!(split_dataset(&facts[..2], [0.8, 0.1, 0.1], 7).is_err());
        assert!(split_dataset(&facts, [0.8, 0.1, 0.2], 7).is_err());
    }
}
