use alloc::vec::Vec;

use super::{Backend, KernelTable};
use crate::graph::{EmbeddingMatrix, Graph, KernelSource, NodeId, RowRef};
use crate::kb::SymbolId;
use crate::math;

/// Which leaf of the full proof graph a numeric score came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leaf {
    /// The initial `1`, the masked `0` or the all-fail sentinel.
    Constant,
    Kernel(SymbolId, SymbolId),
}

/// A success value together with the kernel that attains it. Since scores
/// only combine through `min` and `max`, the gradient of a proof success is
/// the gradient of this single kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub value: f64,
    pub leaf: Leaf,
}

/// Plain-number scores with branch-and-bound: a state whose score is not
/// above the best finished proof is dropped, since `min` can only lower it
/// and later equal maxima lose ties anyway.
pub struct NumericBackend<'a> {
    emb: &'a EmbeddingMatrix,
    table: Option<&'a KernelTable>,
    inputs: &'a [SymbolId],
    mu: f64,
    prune: bool,
    bound: f64,
}

impl<'a> NumericBackend<'a> {
    pub fn new(emb: &'a EmbeddingMatrix) -> Self {
        NumericBackend {
            emb,
            table: None,
            inputs: &[],
            mu: math::DEFAULT_MU,
            prune: true,
            bound: f64::NEG_INFINITY,
        }
    }

    /// Reads kernels from a precomputed table instead of the embeddings.
    pub fn with_table(mut self, table: &'a KernelTable) -> Self {
        self.table = Some(table);
        self
    }

    pub fn with_inputs(mut self, inputs: &'a [SymbolId]) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// Disables branch-and-bound, so every final state is kept.
    pub fn exhaustive(mut self) -> Self {
        self.prune = false;
        self
    }

    fn kernel_sym(&self, a: SymbolId, b: SymbolId) -> f64 {
        match self.table {
            Some(t) => t.kernel(a, b),
            None => math::rbf(self.emb.row(a), self.emb.row(b), self.mu),
        }
    }

    fn dominated(&self, v: f64) -> bool {
        self.prune && v <= self.bound
    }
}

impl Backend for NumericBackend<'_> {
    type Score = Witness;

    fn begin(&mut self) {
        self.bound = f64::NEG_INFINITY;
    }

    fn constant(&mut self, v: f64) -> Witness {
        Witness {
            value: v,
            leaf: Leaf::Constant,
        }
    }

    fn unify_score(
        &mut self,
        upstream: &Witness,
        pairs: &[(RowRef, RowRef)],
        masked: bool,
    ) -> Option<Witness> {
        if masked {
            return (!self.dominated(0.0)).then_some(Witness {
                value: 0.0,
                leaf: Leaf::Constant,
            });
        }
        let mut best = *upstream;
        if self.dominated(best.value) {
            return None;
        }
        for &(a, b) in pairs {
            let (a, b) = (a.resolve(self.inputs), b.resolve(self.inputs));
            let v = self.kernel_sym(a, b);
            if v < best.value {
                if self.dominated(v) {
                    return None;
                }
                best = Witness {
                    value: v,
                    leaf: Leaf::Kernel(a, b),
                };
            }
        }
        Some(best)
    }

    fn aggregate(&mut self, finals: &[Witness]) -> Witness {
        let mut best = finals[0];
        for w in &finals[1..] {
            if w.value > best.value {
                best = *w;
            }
        }
        best
    }

    fn value(&mut self, s: &Witness) -> f64 {
        s.value
    }

    fn kernel(&mut self, a: RowRef, b: RowRef) -> f64 {
        self.kernel_sym(a.resolve(self.inputs), b.resolve(self.inputs))
    }

    fn offer_final(&mut self, s: &Witness) {
        if s.value > self.bound {
            self.bound = s.value;
        }
    }
}

/// Builds the full proof graph. Without embeddings (compiling a goal shape
/// over input slots) values are unknown and K-max pruning is unavailable.
pub struct GraphBackend<'a> {
    pub graph: &'a mut Graph,
    emb: Option<&'a EmbeddingMatrix>,
    inputs: &'a [SymbolId],
    mu: f64,
}

impl<'a> GraphBackend<'a> {
    pub fn new(graph: &'a mut Graph, emb: &'a EmbeddingMatrix) -> Self {
        GraphBackend {
            graph,
            emb: Some(emb),
            inputs: &[],
            mu: math::DEFAULT_MU,
        }
    }

    /// A backend for compiling: nodes are created but never evaluated.
    pub fn symbolic(graph: &'a mut Graph) -> Self {
        GraphBackend {
            graph,
            emb: None,
            inputs: &[],
            mu: math::DEFAULT_MU,
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }
}

impl Backend for GraphBackend<'_> {
    type Score = NodeId;

    fn constant(&mut self, v: f64) -> NodeId {
        self.graph.constant(v)
    }

    fn unify_score(
        &mut self,
        upstream: &NodeId,
        pairs: &[(RowRef, RowRef)],
        masked: bool,
    ) -> Option<NodeId> {
        if masked {
            return Some(self.graph.constant(0.0));
        }
        if pairs.is_empty() {
            return Some(*upstream);
        }
        let mut inputs = Vec::with_capacity(pairs.len() + 1);
        inputs.push(*upstream);
        for &(a, b) in pairs {
            inputs.push(self.graph.rbf(a, b, self.mu));
        }
        self.graph.min(inputs).ok()
    }

    fn aggregate(&mut self, finals: &[NodeId]) -> NodeId {
        self.graph
            .max(finals.to_vec())
            .expect("aggregate is only called with final states")
    }

    fn value(&mut self, s: &NodeId) -> f64 {
        match self.emb {
            Some(emb) => {
                self.graph.extend_forward(emb, self.inputs);
                self.graph.value(*s)
            }
            None => f64::NAN,
        }
    }

    fn kernel(&mut self, a: RowRef, b: RowRef) -> f64 {
        match self.emb {
            Some(emb) => math::rbf(
                emb.row(a.resolve(self.inputs)),
                emb.row(b.resolve(self.inputs)),
                self.mu,
            ),
            None => f64::NAN,
        }
    }
}
