//! Embedding matrix and a scalar reverse-mode computation graph.
//!
//! Nodes are appended in topological order. Leaves read embedding rows
//! directly (an RBF kernel between two rows, or the raw ComplEx trilinear
//! form), so the graph itself only ever carries scalars.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kb::SymbolId;
use crate::math;

/// One row of reals per vocabulary symbol. In complex mode a row holds `2k`
/// reals: `k` real parts followed by `k` imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    k: usize,
    complex: bool,
    data: Vec<f64>,
    trainable: Vec<bool>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, k: usize, complex: bool) -> Self {
        assert!(k >= 1, "embedding dimension must be positive");
        let width = if complex { 2 * k } else { k };
        EmbeddingMatrix {
            k,
            complex,
            data: vec![0.0; rows * width],
            trainable: vec![true; rows],
        }
    }

    /// Xavier-uniform initialisation with fan-in = fan-out = `k`.
    pub fn xavier<R: Rng + ?Sized>(rows: usize, k: usize, complex: bool, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, k, complex);
        let limit = math::sqrt(6.0 / (2.0 * k as f64));
        let dist = Uniform::new_inclusive(-limit, limit);
        for x in &mut m.data {
            *x = dist.sample(rng);
        }
        m
    }

    /// Builds a matrix from explicit rows (all of equal width).
    pub fn from_rows(rows: &[Vec<f64>], complex: bool) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || (complex && width % 2 != 0) {
            return Err(Error::Config("embedding rows must be non-empty (and even in complex mode)".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::Dimension { left: width, right: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(EmbeddingMatrix {
            k: if complex { width / 2 } else { width },
            complex,
            data,
            trainable: vec![true; rows.len()],
        })
    }

    pub fn rows(&self) -> usize {
        self.trainable.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Reals per row: `k`, or `2k` in complex mode.
    pub fn width(&self) -> usize {
        if self.complex {
            2 * self.k
        } else {
            self.k
        }
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    pub fn row(&self, s: SymbolId) -> &[f64] {
        let w = self.width();
        &self.data[s.index() * w..(s.index() + 1) * w]
    }

    pub fn row_mut(&mut self, s: SymbolId) -> &mut [f64] {
        let w = self.width();
        &mut self.data[s.index() * w..(s.index() + 1) * w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_trainable(&self, s: SymbolId) -> bool {
        self.trainable[s.index()]
    }

    pub fn set_trainable(&mut self, s: SymbolId, flag: bool) {
        self.trainable[s.index()] = flag;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Appends zero rows so that the matrix covers `rows` symbols.
    pub fn grow(&mut self, rows: usize) {
        if rows > self.rows() {
            let w = self.width();
            self.data.resize(rows * w, 0.0);
            self.trainable.resize(rows, true);
        }
    }
}

/// Where a leaf reads its embedding row from: a fixed symbol, or an input
/// slot bound when the graph is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowRef {
    Sym(SymbolId),
    Input(u32),
}

impl RowRef {
    pub fn resolve(self, inputs: &[SymbolId]) -> SymbolId {
        match self {
            RowRef::Sym(s) => s,
            RowRef::Input(i) => inputs[i as usize],
        }
    }
}

impl From<SymbolId> for RowRef {
    fn from(s: SymbolId) -> Self {
        RowRef::Sym(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Constant(f64),
    /// `exp(-||a - b|| / (2 mu^2))`.
    Rbf { a: RowRef, b: RowRef, mu: f64 },
    /// ComplEx trilinear form before the sigmoid.
    Bilinear { s: RowRef, i: RowRef, j: RowRef },
    Sigmoid(NodeId),
    Min(Vec<NodeId>),
    Max(Vec<NodeId>),
    Clamp { x: NodeId, lo: f64, hi: f64 },
    NegLog(NodeId),
    OneMinus(NodeId),
    Sum(Vec<NodeId>),
    Scale(NodeId, f64),
}

/// Kernel values looked up instead of recomputed by RBF leaves.
pub trait KernelSource {
    fn kernel(&self, a: SymbolId, b: SymbolId) -> f64;
}

/// Sparse parameter gradients, one dense row per touched symbol.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    rows: BTreeMap<SymbolId, Vec<f64>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row(&self, s: SymbolId) -> Option<&[f64]> {
        self.rows.get(&s).map(Vec::as_slice)
    }

    fn row_entry(&mut self, s: SymbolId, width: usize) -> &mut Vec<f64> {
        self.rows.entry(s).or_insert_with(|| vec![0.0; width])
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &[f64])> {
        self.rows.iter().map(|(s, r)| (*s, r.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True if every stored entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.rows.values().all(|r| r.iter().all(|x| *x == 0.0))
    }

    pub fn add(&mut self, other: &Gradients) {
        for (s, r) in &other.rows {
            let mine = self.row_entry(*s, r.len());
            for (a, b) in mine.iter_mut().zip(r) {
                *a += b;
            }
        }
    }

    pub fn get(&self, s: SymbolId, col: usize) -> f64 {
        self.rows.get(&s).map_or(0.0, |r| r[col])
    }
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    ops: Vec<Op>,
    values: Vec<f64>,
    /// Selected input position of each min/max node after evaluation.
    choice: Vec<u32>,
    rbf_cache: BTreeMap<(RowRef, RowRef, u64), NodeId>,
    one: Option<NodeId>,
    zero: Option<NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn op(&self, n: NodeId) -> &Op {
        &self.ops[n.index()]
    }

    fn push(&mut self, op: Op) -> NodeId {
        let id = NodeId(self.ops.len() as u32);
        self.ops.push(op);
        id
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        let cached = if v == 1.0 {
            &mut self.one
        } else if v == 0.0 && v.is_sign_positive() {
            &mut self.zero
        } else {
            return self.push(Op::Constant(v));
        };
        if let Some(id) = *cached {
            return id;
        }
        let id = NodeId(self.ops.len() as u32);
        *cached = Some(id);
        self.ops.push(Op::Constant(v));
        id
    }

    /// RBF leaf; repeated requests for the same unordered pair share a node.
    pub fn rbf(&mut self, a: RowRef, b: RowRef, mu: f64) -> NodeId {
        let key = if a <= b { (a, b, mu.to_bits()) } else { (b, a, mu.to_bits()) };
        if let Some(&id) = self.rbf_cache.get(&key) {
            return id;
        }
        let id = self.push(Op::Rbf { a, b, mu });
        self.rbf_cache.insert(key, id);
        id
    }

    pub fn bilinear(&mut self, s: RowRef, i: RowRef, j: RowRef) -> NodeId {
        self.push(Op::Bilinear { s, i, j })
    }

    /// Full ComplEx score, `sigmoid(bilinear(s, i, j))`.
    pub fn complex_score(&mut self, s: RowRef, i: RowRef, j: RowRef) -> NodeId {
        let raw = self.bilinear(s, i, j);
        self.sigmoid(raw)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.push(Op::Sigmoid(x))
    }

    pub fn min(&mut self, inputs: Vec<NodeId>) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::Config("min node needs at least one input".into()));
        }
        Ok(self.push(Op::Min(inputs)))
    }

    pub fn max(&mut self, inputs: Vec<NodeId>) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::Config("max node needs at least one input".into()));
        }
        Ok(self.push(Op::Max(inputs)))
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        self.push(Op::Clamp { x, lo, hi })
    }

    pub fn neg_log(&mut self, x: NodeId) -> NodeId {
        self.push(Op::NegLog(x))
    }

    pub fn one_minus(&mut self, x: NodeId) -> NodeId {
        self.push(Op::OneMinus(x))
    }

    pub fn sum(&mut self, inputs: Vec<NodeId>) -> NodeId {
        self.push(Op::Sum(inputs))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        self.push(Op::Scale(x, c))
    }

    /// `-y log p - (1 - y) log(1 - p)` with `p` clamped into
    /// `[FLOOR, 1 - FLOOR]`.
    pub fn nll(&mut self, p: NodeId, target: bool) -> NodeId {
        let c = self.clamp(p, math::FLOOR, 1.0 - math::FLOOR);
        if target {
            self.neg_log(c)
        } else {
            let q = self.one_minus(c);
            self.neg_log(q)
        }
    }

    /// Value of `n` from the most recent evaluation.
    pub fn value(&self, n: NodeId) -> f64 {
        self.values[n.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Input position selected by a min/max node in the last evaluation.
    pub fn choice(&self, n: NodeId) -> usize {
        self.choice[n.index()] as usize
    }

    /// Number of nodes that already carry a value.
    pub fn evaluated(&self) -> usize {
        self.values.len()
    }

    fn eval_op(
        &self,
        op: &Op,
        emb: &EmbeddingMatrix,
        inputs: &[SymbolId],
        kernels: Option<&dyn KernelSource>,
    ) -> (f64, u32) {
        let v = |n: &NodeId| self.values[n.index()];
        match op {
            Op::Constant(c) => (*c, 0),
            Op::Rbf { a, b, mu } => {
                let (a, b) = (a.resolve(inputs), b.resolve(inputs));
                let k = match kernels {
                    Some(t) => t.kernel(a, b),
                    None => math::rbf(emb.row(a), emb.row(b), *mu),
                };
                (k, 0)
            }
            Op::Bilinear { s, i, j } => (
                bilinear(
                    emb,
                    s.resolve(inputs),
                    i.resolve(inputs),
                    j.resolve(inputs),
                ),
                0,
            ),
            Op::Sigmoid(x) => (math::sigmoid(v(x)), 0),
            Op::Min(xs) => select(xs.iter().map(v), |c, best| c < best),
            Op::Max(xs) => select(xs.iter().map(v), |c, best| c > best),
            Op::Clamp { x, lo, hi } => (v(x).clamp(*lo, *hi), 0),
            Op::NegLog(x) => (-math::ln(v(x)), 0),
            Op::OneMinus(x) => (1.0 - v(x), 0),
            Op::Sum(xs) => (xs.iter().map(v).sum(), 0),
            Op::Scale(x, c) => (v(x) * c, 0),
        }
    }

    /// Evaluates nodes added since the last evaluation, without checks.
    pub fn extend_forward(&mut self, emb: &EmbeddingMatrix, inputs: &[SymbolId]) {
        for i in self.values.len()..self.ops.len() {
            let (value, choice) = self.eval_op(&self.ops[i], emb, inputs, None);
            self.values.push(value);
            self.choice.push(choice);
        }
    }

    pub fn forward(&mut self, emb: &EmbeddingMatrix) -> Result<()> {
        self.evaluate_with(emb, &[], None)
    }

    /// Re-evaluates every node with the given input slots and, optionally,
    /// precomputed kernel values.
    pub fn evaluate_with(
        &mut self,
        emb: &EmbeddingMatrix,
        inputs: &[SymbolId],
        kernels: Option<&dyn KernelSource>,
    ) -> Result<()> {
        self.values.clear();
        self.choice.clear();
        for i in 0..self.ops.len() {
            let (value, choice) = self.eval_op(&self.ops[i], emb, inputs, kernels);
            if !value.is_finite() {
                return Err(Error::NonFinite(NodeId(i as u32)));
            }
            self.values.push(value);
            self.choice.push(choice);
        }
        Ok(())
    }

    /// Reverse sweep from `root`; the graph must have been evaluated.
    pub fn backward(&self, root: NodeId, emb: &EmbeddingMatrix) -> Result<Gradients> {
        self.backward_with(root, emb, &[])
    }

    pub fn backward_with(
        &self,
        root: NodeId,
        emb: &EmbeddingMatrix,
        inputs: &[SymbolId],
    ) -> Result<Gradients> {
        assert!(self.values.len() > root.index(), "backward before forward");
        let mut adj = vec![0.0f64; root.index() + 1];
        adj[root.index()] = 1.0;
        let mut grads = Gradients::new();
        let width = emb.width();
        for i in (0..=root.index()).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(NodeId(i as u32)));
            }
            let value = self.values[i];
            match &self.ops[i] {
                Op::Constant(_) => {}
                Op::Rbf { a, b, mu } => {
                    let (a, b) = (a.resolve(inputs), b.resolve(inputs));
                    if a == b {
                        continue;
                    }
                    let (u, w) = (emb.row(a), emb.row(b));
                    let dist = math::sqrt(math::squared_distance(u, w));
                    if dist == 0.0 {
                        continue;
                    }
                    let c = -g * value / (2.0 * mu * mu * dist);
                    let diff: Vec<f64> = u.iter().zip(w).map(|(x, y)| x - y).collect();
                    for (acc, d) in grads.row_entry(a, width).iter_mut().zip(&diff) {
                        *acc += c * d;
                    }
                    for (acc, d) in grads.row_entry(b, width).iter_mut().zip(&diff) {
                        *acc -= c * d;
                    }
                }
                Op::Bilinear { s, i: ri, j } => {
                    let (s, ri, j) = (s.resolve(inputs), ri.resolve(inputs), j.resolve(inputs));
                    bilinear_backward(emb, s, ri, j, g, &mut grads);
                }
                Op::Sigmoid(x) => adj[x.index()] += g * value * (1.0 - value),
                Op::Min(xs) | Op::Max(xs) => adj[xs[self.choice[i] as usize].index()] += g,
                Op::Clamp { x, lo, hi } => {
                    let xv = self.values[x.index()];
                    if *lo <= xv && xv <= *hi {
                        adj[x.index()] += g;
                    }
                }
                Op::NegLog(x) => adj[x.index()] += -g / self.values[x.index()],
                Op::OneMinus(x) => adj[x.index()] -= g,
                Op::Sum(xs) => {
                    for x in xs {
                        adj[x.index()] += g;
                    }
                }
                Op::Scale(x, c) => adj[x.index()] += g * c,
            }
        }
        if grads.iter().any(|(_, row)| row.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite(root));
        }
        Ok(grads)
    }

    /// Nodes `root` depends on, in ascending order.
    pub fn reachable(&self, root: NodeId) -> Vec<NodeId> {
        let mut seen = vec![false; root.index() + 1];
        seen[root.index()] = true;
        for i in (0..=root.index()).rev() {
            if !seen[i] {
                continue;
            }
            match &self.ops[i] {
                Op::Sigmoid(x)
                | Op::Clamp { x, .. }
                | Op::NegLog(x)
                | Op::OneMinus(x)
                | Op::Scale(x, _) => seen[x.index()] = true,
                Op::Min(xs) | Op::Max(xs) | Op::Sum(xs) => {
                    for x in xs {
                        seen[x.index()] = true;
                    }
                }
                Op::Constant(_) | Op::Rbf { .. } | Op::Bilinear { .. } => {}
            }
        }
        (0..=root.index())
            .filter(|&i| seen[i])
            .map(|i| NodeId(i as u32))
            .collect()
    }

    /// Embedding rows read by leaves below `root`.
    pub fn rows_below(&self, root: NodeId, inputs: &[SymbolId]) -> BTreeSet<SymbolId> {
        let mut rows = BTreeSet::new();
        for n in self.reachable(root) {
            match self.ops[n.index()] {
                Op::Rbf { a, b, .. } => {
                    rows.insert(a.resolve(inputs));
                    rows.insert(b.resolve(inputs));
                }
                Op::Bilinear { s, i, j } => {
                    rows.insert(s.resolve(inputs));
                    rows.insert(i.resolve(inputs));
                    rows.insert(j.resolve(inputs));
                }
                _ => {}
            }
        }
        rows
    }

    /// Piecewise regime of every reachable non-smooth node: min/max choice,
    /// clamp side, and whether an RBF sits at zero distance.
    fn regimes(&self, reachable: &[NodeId], emb: &EmbeddingMatrix) -> Vec<u32> {
        reachable
            .iter()
            .map(|n| match &self.ops[n.index()] {
                Op::Min(_) | Op::Max(_) => self.choice[n.index()],
                Op::Clamp { x, lo, hi } => {
                    let v = self.values[x.index()];
                    if v < *lo {
                        0
                    } else if v > *hi {
                        2
                    } else {
                        1
                    }
                }
                Op::Rbf { a, b, .. } => {
                    // A row against itself is constant; only distinct rows
                    // meeting form a kink.
                    let (a, b) = (a.resolve(&[]), b.resolve(&[]));
                    u32::from(a != b && math::squared_distance(emb.row(a), emb.row(b)) == 0.0)
                }
                _ => 0,
            })
            .collect()
    }
}

fn select(values: impl Iterator<Item = f64>, better: impl Fn(f64, f64) -> bool) -> (f64, u32) {
    let mut best = (f64::NAN, 0u32);
    for (i, v) in values.enumerate() {
        if i == 0 || better(v, best.0) || (best.0.is_nan() && !v.is_nan()) {
            best = (v, i as u32);
        }
    }
    best
}

/// `Re(s).(Re(i)*Re(j)) + Re(s).(Im(i)*Im(j)) + Im(s).(Re(i)*Im(j)) - Im(s).(Im(i)*Re(j))`.
pub fn bilinear(emb: &EmbeddingMatrix, s: SymbolId, i: SymbolId, j: SymbolId) -> f64 {
    let k = emb.k();
    let (s, i, j) = (emb.row(s), emb.row(i), emb.row(j));
    let mut acc = 0.0;
    for d in 0..k {
        let (rs, is) = (s[d], s[k + d]);
        let (ri, ii) = (i[d], i[k + d]);
        let (rj, ij) = (j[d], j[k + d]);
        acc += rs * ri * rj + rs * ii * ij + is * ri * ij - is * ii * rj;
    }
    acc
}

fn bilinear_backward(
    emb: &EmbeddingMatrix,
    s: SymbolId,
    i: SymbolId,
    j: SymbolId,
    g: f64,
    grads: &mut Gradients,
) {
    let k = emb.k();
    let w = emb.width();
    let (vs, vi, vj) = (emb.row(s).to_vec(), emb.row(i).to_vec(), emb.row(j).to_vec());
    let mut ds = vec![0.0; w];
    let mut di = vec![0.0; w];
    let mut dj = vec![0.0; w];
    for d in 0..k {
        let (rs, is) = (vs[d], vs[k + d]);
        let (ri, ii) = (vi[d], vi[k + d]);
        let (rj, ij) = (vj[d], vj[k + d]);
        ds[d] = ri * rj + ii * ij;
        ds[k + d] = ri * ij - ii * rj;
        di[d] = rs * rj + is * ij;
        di[k + d] = rs * ij - is * rj;
        dj[d] = rs * ri - is * ii;
        dj[k + d] = rs * ii + is * ri;
    }
    for (sym, d) in [(s, ds), (i, di), (j, dj)] {
        for (acc, x) in grads.row_entry(sym, w).iter_mut().zip(d) {
            *acc += g * x;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FiniteDiffReport {
    /// Largest `|autodiff - fd| / max(1, |fd|)` over checked entries.
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(row, column)` entries skipped because a perturbation crossed a
    /// min/max tie, a clamp boundary or a zero-distance kernel.
    pub flagged: Vec<(SymbolId, usize)>,
    pub tol: f64,
}

impl FiniteDiffReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tol
    }
}

/// Compares reverse-mode gradients of `root` with central differences on
/// every entry of every row the root reads.
pub fn finite_diff_check(
    g: &mut Graph,
    root: NodeId,
    emb: &EmbeddingMatrix,
    h: f64,
    tol: f64,
) -> Result<FiniteDiffReport> {
    assert!(h > 0.0);
    g.forward(emb)?;
    let grads = g.backward(root, emb)?;
    let reachable = g.reachable(root);
    let base = g.regimes(&reachable, emb);
    let mut report = FiniteDiffReport {
        tol,
        ..Default::default()
    };
    let mut work = emb.clone();
    for s in g.rows_below(root, &[]) {
        for col in 0..emb.width() {
            let orig = work.row(s)[col];
            work.row_mut(s)[col] = orig + h;
            g.forward(&work)?;
            let plus = g.value(root);
            let plus_regime = g.regimes(&reachable, &work);
            work.row_mut(s)[col] = orig - h;
            g.forward(&work)?;
            let minus = g.value(root);
            let minus_regime = g.regimes(&reachable, &work);
            work.row_mut(s)[col] = orig;
            if plus_regime != base || minus_regime != base || base_has_kink(&base, &reachable, g) {
                report.flagged.push((s, col));
                continue;
            }
            let fd = (plus - minus) / (2.0 * h);
            let ad = grads.get(s, col);
            let err = (ad - fd).abs() / fd.abs().max(1.0);
            report.max_rel_error = report.max_rel_error.max(err);
            report.checked += 1;
        }
    }
    g.forward(emb)?;
    Ok(report)
}

fn base_has_kink(regime: &[u32], reachable: &[NodeId], g: &Graph) -> bool {
    regime
        .iter()
        .zip(reachable)
        .any(|(r, n)| matches!(g.op(*n), Op::Rbf { .. }) && *r == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(i: u32) -> RowRef {
        RowRef::Sym(SymbolId(i))
    }

    fn matrix(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), false).unwrap()
    }

    #[test]
    fn rbf_values() {
        let emb = matrix(&[&[0.0, 0.0], &[1.0, 0.0], &[0.3, -0.2]]);
        let mut g = Graph::new();
        let same = g.rbf(s(0), s(0), math::DEFAULT_MU);
        let unit = g.rbf(s(0), s(1), math::DEFAULT_MU);
        let ab = g.rbf(s(1), s(2), math::DEFAULT_MU);
        let ba = g.rbf(s(2), s(1), math::DEFAULT_MU);
        assert_eq!(ab, ba);
        g.forward(&emb).unwrap();
        assert_eq!(g.value(same), 1.0);
        assert!((g.value(unit) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn min_max_routing() {
        let emb = EmbeddingMatrix::zeros(1, 1, false);
        let mut g = Graph::new();
        let a = g.constant(0.7);
        let b = g.constant(1.0);
        let c = g.constant(0.3);
        let m = g.min(vec![a, b, c]).unwrap();
        g.forward(&emb).unwrap();
        assert_eq!((g.value(m), g.choice(m)), (0.3, 2));

        let x = g.constant(0.5);
        let y = g.constant(0.5);
        let tie = g.min(vec![x, y]).unwrap();
        let single = g.max(vec![tie]).unwrap();
        g.forward(&emb).unwrap();
        assert_eq!((g.value(tie), g.choice(tie)), (0.5, 0));
        assert_eq!(g.value(single), 0.5);
        assert!(g.min(vec![]).is_err());
    }

    #[test]
    fn gradient_goes_only_to_argmin_rows() {
        let emb = matrix(&[&[0.0, 0.0], &[0.1, 0.0], &[2.0, 1.0], &[2.5, 1.0]]);
        let mut g = Graph::new();
        let near = g.rbf(s(0), s(1), math::DEFAULT_MU);
        let far = g.rbf(s(2), s(3), math::DEFAULT_MU);
        let m = g.min(vec![near, far]).unwrap();
        g.forward(&emb).unwrap();
        let grads = g.backward(m, &emb).unwrap();
        assert!(grads.row(SymbolId(0)).is_none());
        assert!(grads.row(SymbolId(2)).unwrap().iter().any(|x| *x != 0.0));
    }

    #[test]
    fn constant_graph_has_zero_gradients() {
        let emb = EmbeddingMatrix::zeros(2, 3, false);
        let mut g = Graph::new();
        let c = g.constant(0.25);
        let report = finite_diff_check(&mut g, c, &emb, 1e-5, 1e-4).unwrap();
        assert_eq!(report.max_rel_error, 0.0);
        assert!(g.backward(c, &emb).unwrap().is_zero());
    }

    #[test]
    fn rbf_gradient_matches_closed_form_and_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let emb = EmbeddingMatrix::xavier(2, 5, false, &mut rng);
        let mut g = Graph::new();
        let r = g.rbf(s(0), s(1), math::DEFAULT_MU);
        g.forward(&emb).unwrap();
        let grads = g.backward(r, &emb).unwrap();
        let (u, v) = (emb.row(SymbolId(0)), emb.row(SymbolId(1)));
        let dist = math::sqrt(math::squared_distance(u, v));
        for d in 0..5 {
            let expect = -(u[d] - v[d]) / dist * g.value(r);
            assert!((grads.get(SymbolId(0), d) - expect).abs() < 1e-12);
        }
        let report = finite_diff_check(&mut g, r, &emb, 1e-5, 1e-4).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.flagged.is_empty());
    }

    #[test]
    fn zero_distance_rbf_has_zero_gradient() {
        let emb = matrix(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let mut g = Graph::new();
        let r = g.rbf(s(0), s(1), math::DEFAULT_MU);
        g.forward(&emb).unwrap();
        assert!(g.backward(r, &emb).unwrap().is_zero());
    }

    #[test]
    fn tie_is_flagged_not_failed() {
        let emb = matrix(&[&[0.0], &[1.0], &[2.0]]);
        let mut g = Graph::new();
        let a = g.rbf(s(0), s(1), math::DEFAULT_MU);
        let b = g.rbf(s(1), s(2), math::DEFAULT_MU);
        let m = g.min(vec![a, b]).unwrap();
        let report = finite_diff_check(&mut g, m, &emb, 1e-5, 1e-4).unwrap();
        assert!(!report.flagged.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn complex_score_values_and_gradients() {
        let zero = EmbeddingMatrix::zeros(3, 2, true);
        let mut g = Graph::new();
        let c = g.complex_score(s(0), s(1), s(2));
        g.forward(&zero).unwrap();
        assert_eq!(g.value(c), 0.5);

        let one = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0]], true).unwrap();
        let mut g = Graph::new();
        let c = g.complex_score(s(0), s(0), s(0));
        g.forward(&one).unwrap();
        assert!((g.value(c) - 0.731059).abs() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let emb = EmbeddingMatrix::xavier(3, 4, true, &mut rng);
        let mut g = Graph::new();
        let ij = g.complex_score(s(0), s(1), s(2));
        let ji = g.complex_score(s(0), s(2), s(1));
        g.forward(&emb).unwrap();
        assert!((g.value(ij) - g.value(ji)).abs() > 1e-9);
        let report = finite_diff_check(&mut g, ij, &emb, 1e-5, 1e-4).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn real_complex_rows_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut emb = EmbeddingMatrix::xavier(3, 4, true, &mut rng);
        for r in 0..3 {
            for d in 4..8 {
                emb.row_mut(SymbolId(r))[d] = 0.0;
            }
        }
        let a = bilinear(&emb, SymbolId(0), SymbolId(1), SymbolId(2));
        let b = bilinear(&emb, SymbolId(0), SymbolId(2), SymbolId(1));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nll_closed_forms() {
        let emb = EmbeddingMatrix::zeros(1, 1, false);
        let mut g = Graph::new();
        let half = g.constant(0.5);
        let one = g.constant(1.0);
        let floor = g.constant(0.0);
        let a = g.nll(half, true);
        let b = g.nll(one, true);
        let c = g.nll(floor, false);
        g.forward(&emb).unwrap();
        assert!((g.value(a) - core::f64::consts::LN_2).abs() < 1e-12);
        assert!(g.value(b) < 1e-9);
        assert!(g.value(c) < 1e-9);
    }

    #[test]
    fn non_finite_is_reported_with_node() {
        let emb = EmbeddingMatrix::zeros(1, 1, false);
        let mut g = Graph::new();
        let z = g.constant(0.0);
        let bad = g.neg_log(z);
        assert_eq!(g.forward(&emb), Err(Error::NonFinite(bad)));
    }

    #[test]
    fn xavier_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = EmbeddingMatrix::xavier(50, 12, false, &mut rng);
        let limit = math::sqrt(3.0 / 12.0);
        assert!(m.as_slice().iter().all(|x| x.abs() <= limit));
        assert!(m.as_slice().iter().any(|x| x.abs() > 0.8 * limit));
    }
}
