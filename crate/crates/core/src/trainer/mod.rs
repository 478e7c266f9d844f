//! Training: corrupted negatives, negative log-likelihood of proof success
//! (optionally joined with a ComplEx term), ADAM with per-entry clipping.
//!
//! Every success score is a chain of `min`/`max` over kernels, so its
//! gradient is the gradient of one kernel. Each example is therefore proved
//! with [`NumericBackend`](crate::prover::NumericBackend), which reports
//! that kernel, and only a small graph over the winning kernels is
//! differentiated.

mod adam;
mod corrupt;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use corrupt::{corruption_form, sample_corruptions, Corruption, TrainingExample, MAX_TRIES};

use crate::error::{Error, Result};
use crate::graph::{EmbeddingMatrix, Graph, NodeId, RowRef};
use crate::kb::{KnowledgeBase, SymbolId};
use crate::linkpred::{self, FactQuery};
use crate::math;
use crate::prover::{prove_with, KernelTable, Leaf, NumericBackend, ProofTerm, ProveOptions, Witness};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Proof success only.
    Ntp,
    /// Proof success plus a ComplEx auxiliary loss over shared embeddings.
    #[default]
    NtpLambda,
    /// ComplEx alone; no prover is built.
    ComplexOnly,
}

impl Mode {
    pub fn uses_prover(self) -> bool {
        self != Mode::ComplexOnly
    }

    pub fn uses_complex(self) -> bool {
        self != Mode::Ntp
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Ntp => "ntp",
            Mode::NtpLambda => "ntp-lambda",
            Mode::ComplexOnly => "complex",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ntp" => Ok(Mode::Ntp),
            "ntp-lambda" | "ntplambda" => Ok(Mode::NtpLambda),
            "complex" | "complex-only" => Ok(Mode::ComplexOnly),
            other => Err(Error::Config(alloc::format!(
                "unknown model `{other}` (expected ntp, ntp-lambda or complex)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    /// Embedding dimension (complex modes store `2k` reals per symbol).
    pub k: usize,
    pub learning_rate: f64,
    /// Known facts per mini-batch.
    pub batch_known: usize,
    /// Corruptions per known fact.
    pub negatives: usize,
    pub l2: f64,
    /// Average the batch likelihood instead of summing it; the l2 term is
    /// added unscaled either way.
    pub mean_loss: bool,
    /// Gradient entries are clipped to `[-clip, clip]`.
    pub clip: f64,
    pub epochs: usize,
    pub depth: usize,
    pub mu: f64,
    /// K-max pruning width; `None` proves exactly.
    pub kmax: Option<usize>,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            k: 100,
            learning_rate: 0.001,
            batch_known: 10,
            negatives: 4,
            l2: 0.01,
            mean_loss: false,
            clip: 1.0,
            epochs: 100,
            depth: 2,
            mu: math::DEFAULT_MU,
            kmax: Some(10),
            seed: 0,
            mode: Mode::NtpLambda,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(String::from(m)));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if self.batch_known == 0 {
            return bad("batch_known must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.mu > 0.0) || !(self.clip > 0.0) {
            return bad("learning_rate, mu and clip must be positive");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        if self.kmax == Some(0) {
            return bad("kmax must be at least 1 (or unset for exact proving)");
        }
        Ok(())
    }

    fn prove_options(&self) -> ProveOptions {
        ProveOptions::new(self.depth).kmax(self.kmax)
    }
}

/// Everything needed to score atoms with a trained matrix.
#[derive(Clone, Copy)]
pub struct Model<'a> {
    pub kb: &'a KnowledgeBase,
    pub emb: &'a EmbeddingMatrix,
    pub mode: Mode,
    pub depth: usize,
    pub kmax: Option<usize>,
    pub mu: f64,
}

impl<'a> Model<'a> {
    pub fn new(kb: &'a KnowledgeBase, emb: &'a EmbeddingMatrix, hp: &Hyperparams) -> Self {
        Model {
            kb,
            emb,
            mode: hp.mode,
            depth: hp.depth,
            kmax: hp.kmax,
            mu: hp.mu,
        }
    }

    /// Prediction scores: the proof success for the prover modes (ComplEx
    /// only trains alongside), the ComplEx score otherwise.
    pub fn score_all(&self, atoms: &[Vec<SymbolId>]) -> Result<Vec<f64>> {
        if !self.mode.uses_prover() {
            return atoms
                .iter()
                .map(|a| {
                    let q = FactQuery::from_symbols(a)
                        .ok_or_else(|| Error::Config("ComplEx scores binary atoms only".into()))?;
                    linkpred::score_value(q, self.emb)
                })
                .collect();
        }
        let table = KernelTable::new(self.emb, self.mu);
        let opts = ProveOptions::new(self.depth).kmax(self.kmax);
        let one = |a: &Vec<SymbolId>| -> Result<f64> {
            let mut backend = NumericBackend::new(self.emb).with_table(&table).with_mu(self.mu);
            Ok(prove_with(self.kb, &ProofTerm::ground(a), &opts, &mut backend)?
                .success
                .value)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            atoms.par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            atoms.iter().map(one).collect()
        }
    }

    pub fn score(&self, atom: &[SymbolId]) -> Result<f64> {
        Ok(self.score_all(&[atom.to_vec()])?[0])
    }
}

/// Inputs shared by the loss builders.
pub struct LossContext<'a> {
    pub kb: &'a KnowledgeBase,
    pub emb: &'a EmbeddingMatrix,
    /// Kernel lookups for the proof search; computed from `emb` if absent.
    pub table: Option<&'a KernelTable>,
    pub prove: ProveOptions,
    pub mu: f64,
}

/// Proof witness of one example; known facts are masked against
/// themselves.
fn witness(ctx: &LossContext<'_>, table: &KernelTable, ex: &TrainingExample) -> Result<Witness> {
    let mask = if ex.target { ctx.kb.fact_id(&ex.atom) } else { None };
    let opts = ctx.prove.clone().mask(mask);
    let mut backend = NumericBackend::new(ctx.emb).with_table(table).with_mu(ctx.mu);
    Ok(prove_with(ctx.kb, &ProofTerm::ground(&ex.atom), &opts, &mut backend)?.success)
}

fn witnesses(ctx: &LossContext<'_>, batch: &[TrainingExample]) -> Result<Vec<Witness>> {
    let owned;
    let table = match ctx.table {
        Some(t) => t,
        None => {
            owned = KernelTable::new(ctx.emb, ctx.mu);
            &owned
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        batch.par_iter().map(|ex| witness(ctx, table, ex)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch.iter().map(|ex| witness(ctx, table, ex)).collect()
    }
}

fn leaf_node(graph: &mut Graph, w: &Witness, mu: f64) -> NodeId {
    match w.leaf {
        Leaf::Constant => graph.constant(w.value),
        Leaf::Kernel(a, b) => graph.rbf(RowRef::Sym(a), RowRef::Sym(b), mu),
    }
}

fn proof_terms(graph: &mut Graph, ctx: &LossContext<'_>, batch: &[TrainingExample]) -> Result<Vec<NodeId>> {
    let ws = witnesses(ctx, batch)?;
    Ok(batch
        .iter()
        .zip(&ws)
        .map(|(ex, w)| {
            let p = leaf_node(graph, w, ctx.mu);
            graph.nll(p, ex.target)
        })
        .collect())
}

fn complex_terms(graph: &mut Graph, ctx: &LossContext<'_>, batch: &[TrainingExample]) -> Result<Vec<NodeId>> {
    batch
        .iter()
        .map(|ex| {
            let q = FactQuery::from_symbols(&ex.atom)
                .ok_or_else(|| Error::Config("ComplEx scores binary atoms only".into()))?;
            let p = linkpred::score(graph, q, ctx.emb)?;
            Ok(graph.nll(p, ex.target))
        })
        .collect()
}

/// Summed negative log-likelihood of the (clamped) proof success scores.
pub fn ntp_loss(graph: &mut Graph, batch: &[TrainingExample], ctx: &LossContext<'_>) -> Result<NodeId> {
    let terms = proof_terms(graph, ctx, batch)?;
    Ok(graph.sum(terms))
}

/// [`ntp_loss`] plus the same likelihood over ComplEx scores.
pub fn ntp_lambda_loss(graph: &mut Graph, batch: &[TrainingExample], ctx: &LossContext<'_>) -> Result<NodeId> {
    let mut terms = proof_terms(graph, ctx, batch)?;
    terms.extend(complex_terms(graph, ctx, batch)?);
    Ok(graph.sum(terms))
}

/// Likelihood of ComplEx scores alone.
pub fn complex_loss(graph: &mut Graph, batch: &[TrainingExample], ctx: &LossContext<'_>) -> Result<NodeId> {
    let terms = complex_terms(graph, ctx, batch)?;
    Ok(graph.sum(terms))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss, including the l2 term.
    pub loss: f64,
    pub dev_metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub emb: EmbeddingMatrix,
    pub history: Vec<EpochRecord>,
}

/// Called after every epoch with the epoch number (1-based) and the
/// current parameters; returns the development metric, if any.
pub type EpochHook<'h> = dyn FnMut(usize, &EmbeddingMatrix) -> Result<Option<f64>> + 'h;

/// Fresh Xavier-initialised parameters for `kb`'s vocabulary.
pub fn initial_embeddings(kb: &KnowledgeBase, hp: &Hyperparams) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    EmbeddingMatrix::xavier(kb.vocab().len(), hp.k, hp.mode.uses_complex(), &mut rng)
}

/// Trains embeddings (and rule parameters) on every fact of `kb`.
pub fn train(kb: &KnowledgeBase, hp: &Hyperparams, hook: &mut EpochHook<'_>) -> Result<Trained> {
    train_from(kb, hp, initial_embeddings(kb, hp), hook)
}

pub fn train_from(
    kb: &KnowledgeBase,
    hp: &Hyperparams,
    mut emb: EmbeddingMatrix,
    hook: &mut EpochHook<'_>,
) -> Result<Trained> {
    hp.validate()?;
    if emb.rows() != kb.vocab().len() {
        return Err(Error::Dimension {
            left: kb.vocab().len(),
            right: emb.rows(),
        });
    }
    if hp.mode.uses_complex() && !emb.is_complex() {
        return Err(Error::Config("this mode needs complex-mode embeddings".into()));
    }
    let facts: Vec<Vec<SymbolId>> = kb.facts().map(|r| r.head.symbols().unwrap()).collect();
    if hp.mode.uses_complex() && facts.iter().any(|f| f.len() != 3) {
        return Err(Error::Config("ComplEx modes need a knowledge base of binary facts".into()));
    }
    let constants = kb.constants();
    // Sampling uses its own stream so that changing k does not change batches.
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(emb.as_slice().len(), hp.learning_rate);
    let mut history = Vec::with_capacity(hp.epochs);
    let mut order: Vec<usize> = (0..facts.len()).collect();

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(hp.batch_known).enumerate() {
            let mut batch = Vec::with_capacity(chunk.len() * (1 + hp.negatives));
            for (position, &f) in chunk.iter().enumerate() {
                batch.push(TrainingExample::positive(facts[f].clone()));
                batch.extend(sample_corruptions(
                    &facts[f],
                    position,
                    kb,
                    &constants,
                    hp.negatives,
                    &mut rng,
                )?);
            }
            let loss = step(kb, hp, &mut emb, &mut adam, &batch)
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch, batch: b + 1 },
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1 });
            }
            total += loss;
            batches += 1;
        }
        let dev_metric = hook(epoch, &emb)?;
        history.push(EpochRecord {
            epoch,
            loss: if batches == 0 { 0.0 } else { total / batches as f64 },
            dev_metric,
        });
    }
    Ok(Trained { emb, history })
}

/// One ADAM update on `batch`; returns the batch loss including l2.
pub fn step(
    kb: &KnowledgeBase,
    hp: &Hyperparams,
    emb: &mut EmbeddingMatrix,
    adam: &mut Adam,
    batch: &[TrainingExample],
) -> Result<f64> {
    let table = hp.mode.uses_prover().then(|| KernelTable::new(emb, hp.mu));
    let mut graph = Graph::new();
    let root = {
        let ctx = LossContext {
            kb,
            emb,
            table: table.as_ref(),
            prove: hp.prove_options(),
            mu: hp.mu,
        };
        match hp.mode {
            Mode::Ntp => ntp_loss(&mut graph, batch, &ctx)?,
            Mode::NtpLambda => ntp_lambda_loss(&mut graph, batch, &ctx)?,
            Mode::ComplexOnly => complex_loss(&mut graph, batch, &ctx)?,
        }
    };
    graph.forward(emb)?;
    let sparse = graph.backward(root, emb)?;
    let width = emb.width();
    let scale = if hp.mean_loss { 1.0 / batch.len().max(1) as f64 } else { 1.0 };
    let mut grad = vec![0.0; emb.as_slice().len()];
    for (s, row) in sparse.iter() {
        for (g, r) in grad[s.index() * width..(s.index() + 1) * width].iter_mut().zip(row) {
            *g = scale * r;
        }
    }
    let mut penalty = 0.0;
    for (g, x) in grad.iter_mut().zip(emb.as_slice()) {
        penalty += x * x;
        *g += hp.l2 * x;
    }
    clip(&mut grad, hp.clip);
    adam.step(emb, &grad);
    Ok(scale * graph.value(root) + 0.5 * hp.l2 * penalty)
}

/// Clips every entry into `[-c, c]`.
pub fn clip(grad: &mut [f64], c: f64) {
    for g in grad {
        *g = g.clamp(-c, c);
    }
}

#[cfg(test)]
mod tests;
