use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{prove_with, GraphBackend, ProofTerm, ProveOptions};
use crate::error::{Error, Result};
use crate::graph::{EmbeddingMatrix, Graph, KernelSource, NodeId};
use crate::kb::{KnowledgeBase, SymbolId};
use crate::math;

/// Kernel block between the rows of `a` and `b` (both flat, `width` reals
/// per row) through `||x||^2 + ||y||^2 - 2 x.y`, radicand clamped at 0.
fn kernel_block(a: &[f64], b: &[f64], width: usize, mu: f64) -> Vec<f64> {
    let norms = |m: &[f64]| -> Vec<f64> { m.chunks(width).map(|r| math::dot(r, r)).collect() };
    let (na, nb) = (norms(a), norms(b));
    let scale = 2.0 * mu * mu;
    let row = |(x, nx): (&[f64], &f64)| -> Vec<f64> {
        b.chunks(width)
            .zip(&nb)
            .map(|(y, ny)| {
                let r = (nx + ny - 2.0 * math::dot(x, y)).max(0.0);
                math::exp(-math::sqrt(r) / scale)
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let rows: Vec<&[f64]> = a.chunks(width).collect();
        rows.par_iter()
            .zip(na.par_iter())
            .flat_map_iter(|(x, nx)| row((x, nx)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks(width).zip(&na).flat_map(row).collect()
    }
}

/// All-pairs unification success between the rows of `a` (N x k) and `b`
/// (M x k): entry `[n][m]` is the RBF kernel of `a[n]` and `b[m]`.
pub fn batch_unify(a: &[Vec<f64>], b: &[Vec<f64>], mu: f64) -> Result<Vec<Vec<f64>>> {
    let width = a.first().or(b.first()).map_or(0, Vec::len);
    for r in a.iter().chain(b) {
        if r.len() != width {
            return Err(Error::Dimension {
                left: width,
                right: r.len(),
            });
        }
    }
    if width == 0 {
        return Ok(vec![Vec::new(); a.len()]);
    }
    let flat = |m: &[Vec<f64>]| -> Vec<f64> { m.iter().flatten().copied().collect() };
    let block = kernel_block(&flat(a), &flat(b), width, mu);
    Ok(block.chunks(b.len().max(1)).take(a.len()).map(<[f64]>::to_vec).collect())
}

/// Kernel values between every pair of embedding rows, computed once per
/// parameter update and shared by all goals in a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    n: usize,
    values: Vec<f64>,
}

impl KernelTable {
    pub fn new(emb: &EmbeddingMatrix, mu: f64) -> Self {
        let n = emb.rows();
        let mut values = kernel_block(emb.as_slice(), emb.as_slice(), emb.width(), mu);
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        KernelTable { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, a: SymbolId, b: SymbolId) -> f64 {
        self.values[a.index() * self.n + b.index()]
    }
}

impl KernelSource for KernelTable {
    fn kernel(&self, a: SymbolId, b: SymbolId) -> f64 {
        self.get(a, b)
    }
}

/// Shape of goals a compiled proof accepts: `len` terms (predicate first),
/// every one an input slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GoalSpec {
    pub len: usize,
    pub depth: usize,
}

/// A proof graph built once for a goal shape and evaluated for any symbol
/// assignment of that shape.
#[derive(Clone, Debug)]
pub struct CompiledProof {
    spec: GoalSpec,
    graph: Graph,
    root: NodeId,
}

impl CompiledProof {
    /// Fails for K-max or masked options, whose structure depends on the
    /// input symbols, and for KBs whose rule heads would need a runtime
    /// equality check between inputs.
    pub fn compile(kb: &KnowledgeBase, spec: GoalSpec, mu: f64) -> Result<Self> {
        let opts = ProveOptions::new(spec.depth);
        let mut graph = Graph::new();
        let root = {
            let mut backend = GraphBackend::symbolic(&mut graph).with_mu(mu);
            prove_with(kb, &ProofTerm::inputs(spec.len), &opts, &mut backend)?.success
        };
        Ok(CompiledProof { spec, graph, root })
    }

    pub fn spec(&self) -> GoalSpec {
        self.spec
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn evaluate(
        &mut self,
        emb: &EmbeddingMatrix,
        goal: &[SymbolId],
        kernels: Option<&dyn KernelSource>,
    ) -> Result<f64> {
        if goal.len() != self.spec.len {
            return Err(Error::Dimension {
                left: self.spec.len,
                right: goal.len(),
            });
        }
        self.graph.evaluate_with(emb, goal, kernels)?;
        Ok(self.graph.value(self.root))
    }
}

/// Success scores of many ground goals: one compiled graph per goal length,
/// kernels looked up from a single all-pairs table.
pub fn prove_batch(
    kb: &KnowledgeBase,
    goals: &[Vec<SymbolId>],
    emb: &EmbeddingMatrix,
    depth: usize,
    mu: f64,
) -> Result<Vec<f64>> {
    let table = KernelTable::new(emb, mu);
    let mut compiled: BTreeMap<usize, CompiledProof> = BTreeMap::new();
    let mut out = Vec::with_capacity(goals.len());
    for goal in goals {
        let proof = match compiled.entry(goal.len()) {
            alloc::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            alloc::collections::btree_map::Entry::Vacant(e) => e.insert(CompiledProof::compile(
                kb,
                GoalSpec {
                    len: goal.len(),
                    depth,
                },
                mu,
            )?),
        };
        out.push(proof.evaluate(emb, goal, Some(&table))?);
    }
    Ok(out)
}
