//! Hand-written lexer and recursive-descent parser for `.ntp` clauses,
//! `.tmpl` rule templates and single query atoms.
//!
//! Lowercase-initial (or digit-initial) identifiers and single-quoted names
//! are symbols; uppercase- or `_`-initial identifiers are variables. `%`
//! starts a comment that runs to the end of the line.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::template::{RuleTemplate, TemplateArg, TemplateAtom};
use super::{Atom, KnowledgeBase, Term, Var, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Symbol(String),
    Variable(String),
    Int(i64),
    Placeholder(u32),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: core::iter::Peekable<core::str::Chars<'a>>,
    line: usize,
    column: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn take_while(&mut self, mut pred: impl FnMut(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn tokens(mut self) -> Result<Vec<Spanned>> {
        let mut out = Vec::new();
        loop {
            let Some(&c) = self.chars.peek() else {
                return Ok(out);
            };
            let (line, column) = (self.line, self.column);
            let tok = match c {
                c if c.is_whitespace() => {
                    self.bump();
                    continue;
                }
                '%' => {
                    self.take_while(|c| c != '\n');
                    continue;
                }
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                ':' => {
                    self.bump();
                    if self.bump() != Some('-') {
                        return Err(self.error(line, column, "expected `:-`"));
                    }
                    Tok::Neck
                }
                '#' => {
                    self.bump();
                    let digits = self.take_while(|c| c.is_ascii_digit());
                    let n = digits
                        .parse::<u32>()
                        .map_err(|_| self.error(line, column, "expected a number after `#`"))?;
                    Tok::Placeholder(n)
                }
                '\'' => {
                    self.bump();
                    let mut name = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(self.error(line, column, "unterminated quoted symbol")),
                            Some('\'') => break,
                            Some('\\') => match self.bump() {
                                Some(e) => name.push(e),
                                None => {
                                    return Err(self.error(line, column, "unterminated quoted symbol"))
                                }
                            },
                            Some(ch) => name.push(ch),
                        }
                    }
                    Tok::Symbol(name)
                }
                '-' => {
                    self.bump();
                    let digits = self.take_while(|c| c.is_ascii_digit());
                    if digits.is_empty() {
                        return Err(self.error(line, column, "unexpected `-`"));
                    }
                    Tok::Int(-digits.parse::<i64>().unwrap_or(i64::MAX))
                }
                c if c.is_ascii_digit() => {
                    let word = self.take_while(is_ident_char);
                    match word.parse::<i64>() {
                        Ok(n) => Tok::Int(n),
                        Err(_) => Tok::Symbol(word),
                    }
                }
                c if c.is_uppercase() || c == '_' => Tok::Variable(self.take_while(is_ident_char)),
                c if c.is_alphabetic() => Tok::Symbol(self.take_while(is_ident_char)),
                other => return Err(self.error(line, column, format!("unexpected character `{other}`"))),
            };
            out.push(Spanned { tok, line, column });
        }
    }
}

/// Raw parsed term before symbols are interned.
#[derive(Clone, Debug)]
enum RawTerm {
    Symbol(String),
    Variable(String),
    Placeholder(u32),
}

#[derive(Clone, Debug)]
struct RawAtom {
    predicate: RawTerm,
    args: Vec<(RawTerm, usize, usize)>,
    line: usize,
    column: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        let toks = Lexer::new(text).tokens()?;
        let line_count = text.lines().count().max(1);
        let last_len = text.lines().last().map_or(0, |l| l.chars().count());
        Ok(Parser {
            toks,
            pos: 0,
            eof: (line_count, last_len + 1),
        })
    }

    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.eof, |t| (t.line, t.column))
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let (line, column) = self.here();
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn term(&mut self) -> Result<(RawTerm, usize, usize)> {
        let (line, column) = self.here();
        let raw = match self.next().map(|t| t.tok) {
            Some(Tok::Symbol(s)) => RawTerm::Symbol(s),
            Some(Tok::Int(n)) => RawTerm::Symbol(n.to_string()),
            Some(Tok::Variable(v)) => RawTerm::Variable(v),
            Some(Tok::Placeholder(n)) => RawTerm::Placeholder(n),
            _ => {
                self.pos -= 1;
                return Err(self.error("expected a term"));
            }
        };
        Ok((raw, line, column))
    }

    fn atom(&mut self) -> Result<RawAtom> {
        let (predicate, line, column) = self.term()?;
        self.expect(&Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(&Tok::RParen, "`)` or `,`")?;
        Ok(RawAtom {
            predicate,
            args,
            line,
            column,
        })
    }

    /// `atom [:- atom, ...] .`
    fn clause(&mut self) -> Result<(RawAtom, Vec<RawAtom>)> {
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.eat(&Tok::Neck) {
            body.push(self.atom()?);
            while self.eat(&Tok::Comma) {
                body.push(self.atom()?);
            }
        }
        self.expect(&Tok::Dot, "`.`")?;
        Ok((head, body))
    }
}

/// Variable numbering for one clause, by first occurrence. `_` is always fresh.
#[derive(Default)]
struct VarScope {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl VarScope {
    fn var(&mut self, name: &str) -> u32 {
        if name != "_" {
            if let Some(&i) = self.index.get(name) {
                return i;
            }
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_string());
        if name != "_" {
            self.index.insert(name.to_string(), i);
        }
        i
    }
}

fn placeholder_error(line: usize, column: usize) -> Error {
    Error::Syntax {
        line,
        column,
        message: "placeholders are only allowed in templates".into(),
    }
}

fn resolve_atom(
    raw: &RawAtom,
    scope: &mut VarScope,
    mut symbol: impl FnMut(&str) -> Result<Term>,
) -> Result<Atom> {
    let mut terms = Vec::with_capacity(raw.args.len() + 1);
    let mut push = |t: &RawTerm, line, column| -> Result<()> {
        terms.push(match t {
            RawTerm::Symbol(s) => symbol(s)?,
            RawTerm::Variable(v) => Term::Var(Var::new(0, scope.var(v))),
            RawTerm::Placeholder(_) => return Err(placeholder_error(line, column)),
        });
        Ok(())
    };
    push(&raw.predicate, raw.line, raw.column)?;
    for (t, line, column) in &raw.args {
        push(t, *line, *column)?;
    }
    Ok(Atom::new(terms))
}

/// Parses `.ntp` text into a fresh knowledge base.
pub fn parse_kb(text: &str) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::new();
    parse_kb_into(text, &mut kb)?;
    Ok(kb)
}

/// Parses `.ntp` text and appends its clauses to `kb`, extending its
/// vocabulary in first-appearance order. Duplicate facts are skipped.
pub fn parse_kb_into(text: &str, kb: &mut KnowledgeBase) -> Result<()> {
    let mut parser = Parser::new(text)?;
    while !parser.at_end() {
        let (head, body) = parser.clause()?;
        let mut scope = VarScope::default();
        let vocab = kb.vocab_mut();
        let mut intern = |s: &str| Ok(Term::Sym(vocab.intern(s)));
        let head_atom = resolve_atom(&head, &mut scope, &mut intern)?;
        let body_atoms = body
            .iter()
            .map(|a| resolve_atom(a, &mut scope, &mut intern))
            .collect::<Result<Vec<_>>>()?;
        if body_atoms.is_empty() {
            if !head_atom.is_ground() {
                return Err(Error::NonGroundFact {
                    line: head.line,
                    column: head.column,
                });
            }
            kb.add_fact(head_atom);
        } else {
            kb.add_rule(head_atom, body_atoms, scope.names);
        }
    }
    Ok(())
}

/// A parsed query atom; variables live in scope 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub atom: Atom,
    pub var_names: Vec<String>,
}

/// Parses a single atom such as `grandfatherOf(Q, bart)` against an existing
/// vocabulary. A trailing `.` is optional. Unknown symbols are an error.
pub fn parse_query(text: &str, vocab: &Vocabulary) -> Result<Query> {
    let mut parser = Parser::new(text)?;
    let raw = parser.atom()?;
    parser.eat(&Tok::Dot);
    if !parser.at_end() {
        return Err(parser.error("trailing input after query"));
    }
    let mut scope = VarScope::default();
    let atom = resolve_atom(&raw, &mut scope, |s| {
        vocab
            .get(s)
            .map(Term::Sym)
            .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    })?;
    Ok(Query {
        atom,
        var_names: scope.names,
    })
}

/// Parses `.tmpl` text: one `<count> <skeleton>.` per clause.
pub fn parse_templates(text: &str) -> Result<Vec<RuleTemplate>> {
    let mut parser = Parser::new(text)?;
    let mut out = Vec::new();
    while !parser.at_end() {
        let (line, _) = parser.here();
        let count = match parser.next().map(|t| t.tok) {
            Some(Tok::Int(n)) if n > 0 => n as u32,
            Some(Tok::Int(n)) => {
                return Err(Error::Template {
                    line,
                    message: format!("count must be positive, got {n}"),
                })
            }
            _ => {
                parser.pos -= 1;
                return Err(parser.error("expected a template count"));
            }
        };
        let (head, body) = parser.clause()?;
        let mut scope = VarScope::default();
        let mut convert = |raw: &RawAtom| -> Result<TemplateAtom> {
            let slot = match raw.predicate {
                RawTerm::Placeholder(n) => n,
                _ => {
                    return Err(Error::Template {
                        line: raw.line,
                        message: "predicate positions must hold `#n` placeholders".into(),
                    })
                }
            };
            let args = raw
                .args
                .iter()
                .map(|(t, l, _)| match t {
                    RawTerm::Variable(v) => Ok(TemplateArg::Var(scope.var(v))),
                    RawTerm::Symbol(s) => Ok(TemplateArg::Const(s.clone())),
                    RawTerm::Placeholder(_) => Err(Error::Template {
                        line: *l,
                        message: "placeholder used as an argument".into(),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TemplateAtom { slot, args })
        };
        let head = convert(&head)?;
        let body = body.iter().map(&mut convert).collect::<Result<Vec<_>>>()?;
        let template = RuleTemplate::new(count, head, body, scope.names)
            .map_err(|message| Error::Template { line, message })?;
        out.push(template);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fact() {
        let kb = parse_kb("fatherOf(abe, homer).").unwrap();
        assert_eq!(kb.len(), 1);
        assert!(kb.rules()[0].is_fact());
        assert_eq!(kb.vocab().len(), 3);
        assert_eq!(kb.vocab().names(), ["fatherOf", "abe", "homer"]);
    }

    #[test]
    fn empty_text_is_empty_kb() {
        let kb = parse_kb("").unwrap();
        assert!(kb.is_empty());
        assert!(kb.vocab().is_empty());
        assert!(parse_kb("  % only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn rule_with_scoped_variables() {
        let kb = parse_kb("p(X,Y) :- q(Y,X).").unwrap();
        let rule = &kb.rules()[0];
        assert!(!rule.ground);
        assert_eq!(kb.vocab().len(), 2);
        assert_eq!(rule.var_names, ["X", "Y"]);
        assert_eq!(rule.body[0].terms[1], Term::Var(Var::new(0, 1)));
    }

    #[test]
    fn variable_in_fact_is_rejected() {
        let err = parse_kb("p(a, b).\np(a, X).").unwrap_err();
        assert_eq!(err, Error::NonGroundFact { line: 2, column: 1 });
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_kb("p(a, b).\nq(a b).").unwrap_err() {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (2, 5)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_kb("p(a, b)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_kb("p(a) : q(a)."), Err(Error::Syntax { .. })));
    }

    #[test]
    fn comments_and_layout_are_ignored() {
        let kb = parse_kb("% family\nfatherOf(abe,\n   homer). % trailing\nparentOf( homer , bart ).").unwrap();
        assert_eq!(kb.len(), 2);
    }

    #[test]
    fn quoted_and_numeric_symbols() {
        let kb = parse_kb("'located in'('Côte d\\'Ivoire', africa).\nyear(x, 1990).").unwrap();
        assert_eq!(kb.vocab().name(kb.rules()[0].head.args()[0].symbol().unwrap()), "Côte d'Ivoire");
        assert!(kb.vocab().get("1990").is_some());
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let kb = parse_kb("p(X) :- q(X, _), r(_, X).").unwrap();
        assert_eq!(kb.rules()[0].var_names.len(), 3);
    }

    #[test]
    fn query_against_vocabulary() {
        let kb = parse_kb("grandfatherOf(abe, bart).").unwrap();
        let q = parse_query("grandfatherOf(Q, bart)", kb.vocab()).unwrap();
        assert_eq!(q.var_names, ["Q"]);
        assert_eq!(q.atom.arity(), 2);
        assert_eq!(
            parse_query("grandfatherOf(Q, lisa)", kb.vocab()).unwrap_err(),
            Error::UnknownSymbol("lisa".into())
        );
    }

    #[test]
    fn templates_parse() {
        let t = parse_templates("20 #1(X, Y) :- #2(X, Y).").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].count, t[0].slots), (20, 2));

        let t = parse_templates("3 #1(X, Y) :- #2(X, Z), #2(Z, Y).").unwrap();
        assert_eq!(t[0].slots, 2);
        assert_eq!(t[0].body[0].slot, t[0].body[1].slot);

        let t = parse_templates("3 #1(X, Y) :- #1(Y, X).\n3 #1(X, Y) :- #2(X, Z), #2(Z, Y).").unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn template_errors() {
        assert!(matches!(parse_templates("0 #1(X,Y) :- #2(Y,X)."), Err(Error::Template { .. })));
        assert!(matches!(parse_templates("-3 #1(X,Y) :- #2(Y,X)."), Err(Error::Template { .. })));
        assert!(matches!(parse_templates("2 #1(X,#2) :- #2(Y,X)."), Err(Error::Template { .. })));
        assert!(matches!(parse_templates("2 #1(X,Y) :- #3(Y,X)."), Err(Error::Template { .. })));
        assert!(matches!(parse_templates("2 p(X,Y) :- #1(Y,X)."), Err(Error::Template { .. })));
        assert!(matches!(parse_kb("#1(X, Y) :- q(X)."), Err(Error::Syntax { .. })));
    }
}
