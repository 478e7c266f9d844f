//! Reading knowledge bases, templates, triples and split lists from disk.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ntp_core::datasets::CountrySplit;
use ntp_core::kb::{load_triples, parse_kb_into, parse_templates, TripleLayout};
use ntp_core::{Atom, KnowledgeBase, RuleTemplate, SymbolId, Vocabulary};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// `.tsv` and `.txt` files are triples, anything else is `.ntp` clauses.
pub fn is_triples(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "tsv" | "txt"))
}

/// Adds the clauses (or triples) of `path` to `kb`.
pub fn read_kb_into(path: &Path, layout: TripleLayout, binary_only: bool, kb: &mut KnowledgeBase) -> Result<()> {
    let text = read(path)?;
    if is_triples(path) {
        let load = load_triples(&text, layout, binary_only, kb.vocab_mut())
            .with_context(|| format!("in {}", path.display()))?;
        if load.duplicates > 0 {
            log::info!("{}: {} duplicate lines dropped", path.display(), load.duplicates);
        }
        if load.skipped_unary > 0 {
            log::info!("{}: {} unary atoms dropped", path.display(), load.skipped_unary);
        }
        for atom in load.atoms {
            kb.add_fact(atom);
        }
    } else {
        parse_kb_into(&text, kb).with_context(|| format!("in {}", path.display()))?;
    }
    Ok(())
}

pub fn read_kb(path: &Path, layout: TripleLayout, binary_only: bool) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::new();
    read_kb_into(path, layout, binary_only, &mut kb)?;
    Ok(kb)
}

/// Ground facts of a triples or `.ntp` file, interned into `vocab`.
pub fn read_facts(path: &Path, layout: TripleLayout, binary_only: bool, vocab: &mut Vocabulary) -> Result<Vec<Atom>> {
    let mut kb = KnowledgeBase::with_vocabulary(std::mem::take(vocab));
    let res = read_kb_into(path, layout, binary_only, &mut kb);
    let facts: Vec<Atom> = kb.facts().map(|r| r.head.clone()).collect();
    let non_facts = kb.len() - facts.len();
    *vocab = kb.vocab().clone();
    res?;
    if non_facts > 0 {
        bail!("{} contains rules; expected ground facts only", path.display());
    }
    Ok(facts)
}

pub fn read_templates(path: &Path) -> Result<Vec<RuleTemplate>> {
    parse_templates(&read(path)?).with_context(|| format!("in {}", path.display()))
}

/// One name per line; blank lines and `#` comments are skipped.
pub fn read_names(path: &Path) -> Result<Vec<String>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

pub fn write_names(path: &Path, names: &[&str]) -> Result<()> {
    let mut text = names.join("\n");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn lookup(vocab: &Vocabulary, names: &[String], path: &Path) -> Result<Vec<SymbolId>> {
    names
        .iter()
        .map(|n| {
            vocab
                .get(n)
                .with_context(|| format!("{}: unknown symbol `{n}`", path.display()))
        })
        .collect()
}

/// `train.txt`, `dev.txt` and `test.txt` under `dir`.
pub fn read_country_split(dir: &Path, vocab: &Vocabulary) -> Result<CountrySplit> {
    let part = |name: &str| -> Result<Vec<SymbolId>> {
        let path = dir.join(name);
        lookup(vocab, &read_names(&path)?, &path)
    };
    Ok(CountrySplit {
        train: part("train.txt")?,
        dev: part("dev.txt")?,
        test: part("test.txt")?,
    })
}

pub fn write_country_split(dir: &Path, vocab: &Vocabulary, split: &CountrySplit) -> Result<()> {
    for (name, ids) in [("train.txt", &split.train), ("dev.txt", &split.dev), ("test.txt", &split.test)] {
        let names: Vec<&str> = ids.iter().map(|&i| vocab.name(i)).collect();
        write_names(&dir.join(name), &names)?;
    }
    Ok(())
}

/// Renders ground atoms as triples in `layout` order.
pub fn triples_text(vocab: &Vocabulary, facts: &[Atom], layout: TripleLayout) -> String {
    let mut out = String::new();
    for f in facts {
        let names: Vec<&str> = f
            .symbols()
            .expect("ground fact")
            .iter()
            .map(|&s| vocab.name(s))
            .collect();
        let cols = match (layout, names.len()) {
            (TripleLayout::RelationSecond, 3) => vec![names[1], names[0], names[2]],
            _ => names,
        };
        out.push_str(&cols.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_roundtrip_in_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let kb = ntp_core::kb::parse_kb("r(a, b).\ns(b, c).").unwrap();
        let facts: Vec<Atom> = kb.facts().map(|r| r.head.clone()).collect();
        for layout in [TripleLayout::RelationFirst, TripleLayout::RelationSecond] {
            let path = dir.path().join("f.tsv");
            fs::write(&path, triples_text(kb.vocab(), &facts, layout)).unwrap();
            let back = read_kb(&path, layout, false).unwrap();
            assert_eq!(back.render(), kb.render());
        }
    }

    #[test]
    fn facts_file_with_rules_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.ntp");
        fs::write(&path, "p(a, b).\nq(X, Y) :- p(X, Y).\n").unwrap();
        let mut v = Vocabulary::new();
        assert!(read_facts(&path, TripleLayout::default(), false, &mut v).is_err());
    }

    #[test]
    fn split_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = Vocabulary::new();
        let ids: Vec<SymbolId> = ["a", "b", "c"].iter().map(|n| v.intern(n)).collect();
        let split = CountrySplit {
            train: vec![ids[0]],
            dev: vec![ids[1]],
            test: vec![ids[2]],
        };
        write_country_split(dir.path(), &v, &split).unwrap();
        assert_eq!(read_country_split(dir.path(), &v).unwrap(), split);
        fs::write(dir.path().join("test.txt"), "zzz\n").unwrap();
        let err = read_country_split(dir.path(), &v).unwrap_err().to_string();
        assert!(err.contains("zzz"), "{err}");
    }
}
