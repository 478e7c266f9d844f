use alloc::string::String;

use crate::graph::NodeId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("fact at {line}:{column} contains a variable; facts must be ground")]
    NonGroundFact { line: usize, column: usize },
    #[error("invalid template on line {line}: {message}")]
    Template { line: usize, message: String },
    #[error("line {line}: expected 2 or 3 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("non-finite value at node {}", .0.index())]
    NonFinite(NodeId),
    #[error("{0}")]
    Config(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("could not sample a corruption outside the knowledge base after {0} attempts")]
    CorruptionExhausted(usize),
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("average precision needs at least one positive example")]
    NoPositives,
    #[error("no known predicate to decode parameterized rules against")]
    NoKnownPredicates,
    #[error("scorer failed: {0}")]
    Scorer(String),
}
