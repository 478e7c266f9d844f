//! ComplEx link prediction over the shared embedding matrix.

use crate::error::{Error, Result};
use crate::graph::{bilinear, EmbeddingMatrix, Graph, NodeId, RowRef};
use crate::kb::SymbolId;
use crate::math;

/// A ground binary atom `[s, i, j]`: relation, first and second argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactQuery {
    pub s: SymbolId,
    pub i: SymbolId,
    pub j: SymbolId,
}

impl FactQuery {
    pub fn new(s: SymbolId, i: SymbolId, j: SymbolId) -> Self {
        FactQuery { s, i, j }
    }

    /// `None` unless `symbols` has exactly three entries.
    pub fn from_symbols(symbols: &[SymbolId]) -> Option<Self> {
        match *symbols {
            [s, i, j] => Some(FactQuery { s, i, j }),
            _ => None,
        }
    }
}

fn require_complex(emb: &EmbeddingMatrix) -> Result<()> {
    if emb.is_complex() {
        Ok(())
    } else {
        Err(Error::Config("ComplEx scoring needs complex-mode embeddings".into()))
    }
}

/// Adds `sigmoid(ComplEx(s, i, j))` to `graph`.
pub fn score(graph: &mut Graph, q: FactQuery, emb: &EmbeddingMatrix) -> Result<NodeId> {
    require_complex(emb)?;
    Ok(graph.complex_score(RowRef::Sym(q.s), RowRef::Sym(q.i), RowRef::Sym(q.j)))
}

/// The same score as a plain number.
pub fn score_value(q: FactQuery, emb: &EmbeddingMatrix) -> Result<f64> {
    require_complex(emb)?;
    Ok(math::sigmoid(bilinear(emb, q.s, q.i, q.j)))
}
