use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::objective::{nce_update, Scratch, Trainable};
use super::params::{Block, Params};
use super::train::{init_rows, sample_negatives, splitmix, window_context};
use super::{EmbeddingTable, Mode};
use crate::error::{Error, Result};
use crate::tokenizer::SymbolToken;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceSettings {
    pub steps: usize,
    /// Starting learning rate; decays linearly towards the table's `lr_end`.
    pub lr: f64,
    pub seed: u64,
}

impl InferenceSettings {
    /// 50 passes starting from the table's initial learning rate.
    pub fn for_table(table: &EmbeddingTable) -> Self {
        Self {
            steps: 50,
            lr: table.config.lr_start,
            seed: table.config.seed,
        }
    }
}

/// Seed derived from the token surfaces, so equal formulae infer equal vectors.
pub fn formula_seed(base: u64, tokens: &[SymbolToken]) -> u64 {
    let mut h = Sha256::new();
    for t in tokens {
        h.update(t.surface.as_bytes());
        h.update(b" ");
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    splitmix(base ^ u64::from_le_bytes(bytes))
}

/// Frozen table plus one trainable formula row.
struct InferParams<'a> {
    table: &'a EmbeddingTable,
    vector: &'a mut [f64],
}

impl Params for InferParams<'_> {
    fn read(&self, block: Block, row: usize, out: &mut [f64]) {
        match block {
            Block::Input => out.copy_from_slice(self.table.input_vector(row)),
            Block::Context => out.copy_from_slice(self.table.context_vector(row)),
            Block::Formula => out.copy_from_slice(self.vector),
        }
    }

    fn add(&mut self, block: Block, _row: usize, scale: f64, x: &[f64]) {
        debug_assert_eq!(block, Block::Formula, "word rows are frozen during inference");
        for (p, g) in self.vector.iter_mut().zip(x) {
            *p += scale * g;
        }
    }
}

/// Fits a fresh formula vector against the frozen word rows of a PV-DM table.
///
/// Out-of-vocabulary tokens are skipped. A formula left with a single token
/// is fitted from the formula row alone.
pub fn infer_vector(tokens: &[SymbolToken], table: &EmbeddingTable, settings: &InferenceSettings) -> Result<Vec<f64>> {
    if table.mode() != Mode::Formula2vec {
        return Err(Error::WrongMode {
            expected: Mode::Formula2vec.as_str(),
            actual: table.mode().as_str(),
        });
    }
    let vocab = table.vocab();
    let ids: Vec<usize> = tokens.iter().filter_map(|t| vocab.index_of(&t.surface)).collect();
    if ids.is_empty() {
        return Err(Error::UnknownTokensOnly);
    }
    let cfg = &table.config;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut vector = init_rows(&mut rng, 1, cfg.dim);
    let lr_end = cfg.lr_end.min(settings.lr);

    let mut scratch = Scratch::new(cfg.dim);
    let mut context = Vec::with_capacity(2 * cfg.window);
    let mut negatives = Vec::with_capacity(cfg.negatives);
    let mut params = InferParams {
        table,
        vector: &mut vector,
    };
    for step in 0..settings.steps {
        let lr = settings.lr - (settings.lr - lr_end) * step as f64 / settings.steps as f64;
        for pos in 0..ids.len() {
            if ids.len() > 1 {
                window_context(&mut rng, &ids, pos, cfg.window, &mut context);
            } else {
                context.clear();
            }
            sample_negatives(&mut rng, vocab, ids[pos], cfg.negatives, &mut negatives);
            nce_update(
                &mut params,
                &mut scratch,
                Some(0),
                &context,
                ids[pos],
                &negatives,
                lr,
                Trainable::FORMULA_ONLY,
            )?;
        }
    }
    Ok(vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FormulaStore;
    use crate::embeddings::{train_formula2vec, train_symbol2vec, TrainingConfig};
    use crate::tokenizer::{tokenize, Tokenizer};
    use crate::vocab::build_vocabulary;

    fn trained(mode: Mode) -> EmbeddingTable {
        let t = Tokenizer::default();
        let c: FormulaStore = ["x + y = z", "\\sin x + \\cos y = 1", "a - b = c"]
            .iter()
            .enumerate()
            .map(|(i, s)| t.tokenize_formula(format!("f{i}"), s).unwrap())
            .collect();
        let vocab = build_vocabulary(&c, 1, 0.75).unwrap();
        let cfg = TrainingConfig {
            dim: 8,
            epochs: 5,
            mode,
            ..TrainingConfig::symbol2vec()
        };
        match mode {
            Mode::Formula2vec => train_formula2vec(&c, &vocab, &cfg).unwrap().0,
            Mode::Symbol2vec => train_symbol2vec(&c, &vocab, &cfg).unwrap().0,
        }
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let table = trained(Mode::Formula2vec);
        let s = InferenceSettings {
            steps: 0,
            lr: 0.025,
            seed: 9,
        };
        let v = infer_vector(&tokenize("x + y").unwrap(), &table, &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(v, init_rows(&mut rng, 1, 8));
    }

    #[test]
    fn inference_is_deterministic_and_leaves_table_alone() {
        let table = trained(Mode::Formula2vec);
        let before = table.clone();
        let s = InferenceSettings::for_table(&table);
        let toks = tokenize("x + y = 1").unwrap();
        let a = infer_vector(&toks, &table, &s).unwrap();
        let b = infer_vector(&toks, &table, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(table, before);
        assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn oov_tokens_are_skipped() {
        let table = trained(Mode::Formula2vec);
        let s = InferenceSettings::for_table(&table);
        let with_oov = infer_vector(&tokenize("x \\Omega + \\Psi y").unwrap(), &table, &s).unwrap();
        let without = infer_vector(&tokenize("x + y").unwrap(), &table, &s).unwrap();
        // same in-vocabulary sequence and seed: identical result
        assert_eq!(with_oov, without);
        assert!(matches!(
            infer_vector(&tokenize("\\Omega \\Psi").unwrap(), &table, &s),
            Err(Error::UnknownTokensOnly)
        ));
    }

    #[test]
    fn single_token_formula_is_inferred() {
        let table = trained(Mode::Formula2vec);
        let v = infer_vector(&tokenize("x").unwrap(), &table, &InferenceSettings::for_table(&table)).unwrap();
        assert_eq!(v.len(), 8);
    }

    #[test]
    fn symbol_tables_cannot_infer() {
        let table = trained(Mode::Symbol2vec);
        assert!(matches!(
            infer_vector(
                &tokenize("x + y").unwrap(),
                &table,
                &InferenceSettings::for_table(&table)
            ),
            Err(Error::WrongMode { .. })
        ));
    }

    #[test]
    fn seed_depends_on_content() {
        let a = tokenize("x + y").unwrap();
        let b = tokenize("x+y").unwrap();
        let c = tokenize("x - y").unwrap();
        assert_eq!(formula_seed(1, &a), formula_seed(1, &b));
        assert_ne!(formula_seed(1, &a), formula_seed(1, &c));
        assert_ne!(formula_seed(1, &a), formula_seed(2, &a));
    }
}
