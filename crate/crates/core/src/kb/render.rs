use core::fmt;

use super::{Atom, Rule, Term, Vocabulary};

/// Symbols that would not re-lex as a plain symbol token must be quoted.
pub fn needs_quotes(name: &str) -> bool {
    let Some(first) = name.chars().next() else {
        return true;
    };
    let plain = first.is_alphabetic()
        && !first.is_uppercase()
        && name.chars().all(|c| c.is_alphanumeric() || c == '_');
    let integer = name.parse::<i64>().is_ok_and(|n| alloc::format!("{n}") == name);
    !(plain || integer)
}

pub(crate) fn write_symbol(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if needs_quotes(name) {
        f.write_str("'")?;
        for c in name.chars() {
            if c == '\'' || c == '\\' {
                f.write_str("\\")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("'")
    } else {
        f.write_str(name)
    }
}

/// Formats an atom as `pred(a,B)`; `separator` goes between arguments.
pub struct AtomDisplay<'a> {
    atom: &'a Atom,
    vocab: &'a Vocabulary,
    var_names: &'a [alloc::string::String],
    separator: &'static str,
}

impl<'a> AtomDisplay<'a> {
    pub fn new(atom: &'a Atom, vocab: &'a Vocabulary, var_names: &'a [alloc::string::String]) -> Self {
        AtomDisplay {
            atom,
            vocab,
            var_names,
            separator: ", ",
        }
    }

    /// Arguments without spaces, e.g. `locatedIn(X,Y)`.
    pub fn compact(mut self) -> Self {
        self.separator = ",";
        self
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term, vocab: &Vocabulary, var_names: &[alloc::string::String]) -> fmt::Result {
    match *t {
        Term::Sym(s) => write_symbol(f, vocab.name(s)),
        Term::Var(v) => match var_names.get(v.index as usize) {
            Some(name) if name != "_" && v.scope == 0 => f.write_str(name),
            Some(name) if v.scope == 0 => write!(f, "{name}{}", v.index),
            _ if v.scope == 0 => write!(f, "V{}", v.index),
            _ => write!(f, "_G{}_{}", v.scope, v.index),
        },
    }
}

impl fmt::Display for AtomDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, &self.atom.terms[0], self.vocab, self.var_names)?;
        f.write_str("(")?;
        for (i, t) in self.atom.args().iter().enumerate() {
            if i > 0 {
                f.write_str(self.separator)?;
            }
            write_term(f, t, self.vocab, self.var_names)?;
        }
        f.write_str(")")
    }
}

/// Formats a rule as `head :- b1, b2.` (or `fact.`).
pub struct RuleDisplay<'a> {
    rule: &'a Rule,
    vocab: &'a Vocabulary,
    compact: bool,
}

impl<'a> RuleDisplay<'a> {
    pub fn new(rule: &'a Rule, vocab: &'a Vocabulary) -> Self {
        RuleDisplay {
            rule,
            vocab,
            compact: false,
        }
    }

    pub fn compact(mut self) -> Self {
        self.compact = true;
        self
    }
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atom = |a| {
            let d = AtomDisplay::new(a, self.vocab, &self.rule.var_names);
            if self.compact {
                d.compact()
            } else {
                d
            }
        };
        write!(f, "{}", atom(&self.rule.head))?;
        for (i, b) in self.rule.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{}", atom(b))?;
        }
        f.write_str(".")
    }
}
