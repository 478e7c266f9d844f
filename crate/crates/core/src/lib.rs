//! Neural theorem proving over function-free knowledge bases.
//!
//! The crate builds differentiable proof graphs by backward chaining: symbols
//! are compared through an RBF kernel over their embeddings instead of by
//! equality, a proof's success is the minimum kernel value along it, and the
//! success of a goal is the maximum over all proofs up to a depth bound.
//!
//! Everything here is `no_std` + `alloc`. File formats, the command-line tool
//! and thread pools live in the companion `ntp` crate.
//!
//! Layout:
//! - [`kb`]: symbols, atoms, rules, knowledge bases, the `.ntp` / template /
//!   triple parsers and dataset splitting.
//! - [`graph`]: embedding matrix and a scalar reverse-mode computation graph.
//! - [`prover`]: unify / or / and, proof aggregation, masking, K-max pruning,
//!   kernel tables and compiled goal graphs.
//! - [`oracle`]: plain symbolic backward chaining with the same depth and
//!   rule-reuse conventions.
//! - [`linkpred`]: ComplEx scoring over the shared embedding matrix.
//! - [`trainer`]: corruptions, losses, ADAM and the training loop.
//! - [`eval`]: filtered ranking metrics, average precision, rule decoding.
//! - [`datasets`]: Countries task construction and a synthetic KB generator.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod datasets;
pub mod error;
pub mod eval;
pub mod graph;
pub mod kb;
pub mod linkpred;
pub mod math;
pub mod oracle;
pub mod prover;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{EmbeddingMatrix, Graph, NodeId};
pub use kb::{Atom, KnowledgeBase, Rule, RuleId, RuleTemplate, SymbolId, Term, Var, Vocabulary};
