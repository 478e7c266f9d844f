//! JSON parameter checkpoints.
//!
//! ```json
//! {
//!   "format": "ntp-checkpoint",
//!   "version": 1,
//!   "dim": 100,
//!   "complex": true,
//!   "mu": 0.7071067811865476,
//!   "symbols": [
//!     { "name": "locatedIn", "parameterized": false, "vector": [0.1, ...] },
//!     { "name": "#1.1.1", "parameterized": true, "vector": [...] }
//!   ]
//! }
//! ```
//!
//! Symbols are listed in vocabulary id order. `vector` holds `dim` reals, or
//! `2 * dim` when `complex` is set (real parts first, then imaginary parts).
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ntp_core::{EmbeddingMatrix, Vocabulary};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "ntp-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub name: String,
    pub parameterized: bool,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub complex: bool,
    pub mu: f64,
    pub symbols: Vec<SymbolEntry>,
}

impl Checkpoint {
    pub fn new(vocab: &Vocabulary, emb: &EmbeddingMatrix, mu: f64) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            dim: emb.k(),
            complex: emb.is_complex(),
            mu,
            symbols: vocab
                .ids()
                .map(|id| SymbolEntry {
                    name: vocab.name(id).to_string(),
                    parameterized: vocab.is_parameterized(id),
                    vector: emb.row(id).to_vec(),
                })
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).with_context(|| format!("parsing checkpoint {}", path.display()))?;
        ck.check()?;
        Ok(ck)
    }

    fn width(&self) -> usize {
        if self.complex {
            2 * self.dim
        } else {
            self.dim
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != FORMAT {
            bail!("not an ntp checkpoint (format `{}`)", self.format);
        }
        if self.version != VERSION {
            bail!("unsupported checkpoint version {}", self.version);
        }
        if self.dim == 0 {
            bail!("checkpoint dimension is 0");
        }
        for s in &self.symbols {
            if s.vector.len() != self.width() {
                bail!(
                    "symbol `{}` has {} values, expected {}",
                    s.name,
                    s.vector.len(),
                    self.width()
                );
            }
        }
        Ok(())
    }

    /// The vocabulary the checkpoint was written from, ids preserved.
    pub fn vocabulary(&self) -> Result<Vocabulary> {
        let mut v = Vocabulary::new();
        for (i, s) in self.symbols.iter().enumerate() {
            let id = v.intern(&s.name);
            if id.index() != i {
                bail!("duplicate symbol `{}` in checkpoint", s.name);
            }
            v.set_parameterized(id, s.parameterized);
        }
        Ok(v)
    }

    /// Embedding rows laid out for `vocab`; every symbol must be present.
    pub fn embeddings_for(&self, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
        let by_name: std::collections::HashMap<&str, &SymbolEntry> =
            self.symbols.iter().map(|s| (s.name.as_str(), s)).collect();
        let mut missing = Vec::new();
        let rows: Vec<Vec<f64>> = vocab
            .ids()
            .map(|id| match by_name.get(vocab.name(id)) {
                Some(s) => s.vector.clone(),
                None => {
                    missing.push(vocab.name(id).to_string());
                    Vec::new()
                }
            })
            .collect();
        if !missing.is_empty() {
            missing.truncate(5);
            bail!(
                "checkpoint/vocabulary mismatch: no vector for {}",
                missing.join(", ")
            );
        }
        Ok(EmbeddingMatrix::from_rows(&rows, self.complex)?)
    }
}
