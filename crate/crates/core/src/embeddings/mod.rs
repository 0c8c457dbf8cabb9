//! Symbol embeddings (CBOW with negative sampling) and formula embeddings
//! (PV-DM with averaged inputs), plus inference for unseen formulae.

mod infer;
mod io;
mod objective;
mod params;
mod train;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

pub use infer::{formula_seed, infer_vector, InferenceSettings};
pub use io::{read_docvec, read_word2vec, write_docvec, write_word2vec, KeyedRow, DOCVEC_HEADER, MODEL_HEADER};
pub use objective::{cbow_step, log_sigmoid, nce_loss, pvdm_step, sigmoid, PREACTIVATION_CLAMP};
pub use train::{train_formula2vec, train_symbol2vec, TrainingReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Symbol2vec,
    Formula2vec,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Symbol2vec => "symbol2vec",
            Mode::Formula2vec => "formula2vec",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symbol2vec" => Ok(Mode::Symbol2vec),
            "formula2vec" => Ok(Mode::Formula2vec),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// Hyperparameters shared by both trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub dim: usize,
    /// Maximum context width on each side; the effective width is drawn per position.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Frequent-token subsampling threshold; 0 disables it.
    pub subsample: f64,
    /// 1 = deterministic single-worker training.
    pub workers: usize,
}

impl TrainingConfig {
    /// Symbol vectors, 100 dimensions.
    pub fn symbol2vec() -> Self {
        Self {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            seed: 42,
            mode: Mode::Symbol2vec,
            subsample: 0.0,
            workers: 1,
        }
    }

    /// Formula vectors, 300 dimensions.
    pub fn formula2vec() -> Self {
        Self {
            dim: 300,
            mode: Mode::Formula2vec,
            ..Self::symbol2vec()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dim == 0 {
            return bad("dim must be >= 1".into());
        }
        if self.window == 0 {
            return bad("window must be >= 1".into());
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end && self.lr_start.is_finite()) {
            return bad(format!(
                "learning rates must satisfy lr_start >= lr_end > 0 (got {} and {})",
                self.lr_start, self.lr_end
            ));
        }
        if !(self.subsample.is_finite() && self.subsample >= 0.0) {
            return bad(format!("subsample must be >= 0, got {}", self.subsample));
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        Ok(())
    }
}

/// Trained parameters. Rows of `input` and `context` follow vocabulary indices;
/// rows of `formula` follow the training corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub config: TrainingConfig,
    vocab: Vocabulary,
    input: Vec<f64>,
    context: Vec<f64>,
    formula: Vec<f64>,
    formula_ids: Vec<String>,
    formula_index: HashMap<String, usize>,
}

impl EmbeddingTable {
    /// Assembles a table from row-major blocks; sizes must match the vocabulary,
    /// the formula ids and `config.dim`.
    pub fn from_parts(
        config: TrainingConfig,
        vocab: Vocabulary,
        input: Vec<f64>,
        context: Vec<f64>,
        formula_ids: Vec<String>,
        formula: Vec<f64>,
    ) -> Result<Self> {
        let dim = config.dim;
        let v = vocab.len();
        if input.len() != v * dim {
            return Err(Error::DimensionMismatch {
                expected: v * dim,
                actual: input.len(),
            });
        }
        if context.len() != v * dim {
            return Err(Error::DimensionMismatch {
                expected: v * dim,
                actual: context.len(),
            });
        }
        if formula.len() != formula_ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: formula_ids.len() * dim,
                actual: formula.len(),
            });
        }
        let formula_index = formula_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            config,
            vocab,
            input,
            context,
            formula,
            formula_ids,
            formula_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn input_vector(&self, index: usize) -> &[f64] {
        row(&self.input, self.dim(), index)
    }

    pub fn context_vector(&self, index: usize) -> &[f64] {
        row(&self.context, self.dim(), index)
    }

    pub fn symbol_vector(&self, surface: &str) -> Option<&[f64]> {
        self.vocab.index_of(surface).map(|i| self.input_vector(i))
    }

    pub fn formula_count(&self) -> usize {
        self.formula_ids.len()
    }

    pub fn formula_ids(&self) -> &[String] {
        &self.formula_ids
    }

    pub fn formula_vector(&self, index: usize) -> &[f64] {
        row(&self.formula, self.dim(), index)
    }

    pub fn formula_vector_by_id(&self, id: &str) -> Option<&[f64]> {
        self.formula_index.get(id).map(|&i| self.formula_vector(i))
    }

    pub fn input_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.input.chunks_exact(self.dim())
    }

    pub fn context_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.context.chunks_exact(self.dim())
    }

    pub fn formula_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.formula.chunks_exact(self.dim())
    }

    /// True when every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.input
            .iter()
            .chain(&self.context)
            .chain(&self.formula)
            .all(|x| x.is_finite())
    }

    pub(crate) fn raw_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.input, &mut self.context, &mut self.formula)
    }

    /// Multiplies every input row by `factor`.
    pub fn scale_inputs(&mut self, factor: f64) {
        self.input.iter_mut().for_each(|x| *x *= factor);
    }
}

fn row(data: &[f64], dim: usize, index: usize) -> &[f64] {
    &data[index * dim..(index + 1) * dim]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants() {
        assert!(TrainingConfig::symbol2vec().validate().is_ok());
        assert_eq!(TrainingConfig::symbol2vec().dim, 100);
        assert_eq!(TrainingConfig::formula2vec().dim, 300);
        for broken in [
            TrainingConfig {
                epochs: 0,
                ..TrainingConfig::symbol2vec()
            },
            TrainingConfig {
                dim: 0,
                ..TrainingConfig::symbol2vec()
            },
            TrainingConfig {
                window: 0,
                ..TrainingConfig::symbol2vec()
            },
            TrainingConfig {
                negatives: 0,
                ..TrainingConfig::symbol2vec()
            },
            TrainingConfig {
                lr_start: 0.001,
                lr_end: 0.01,
                ..TrainingConfig::symbol2vec()
            },
            TrainingConfig {
                lr_end: 0.0,
                ..TrainingConfig::symbol2vec()
            },
        ] {
            assert!(matches!(broken.validate(), Err(Error::InvalidConfig(_))));
        }
    }
}
