use std::sync::atomic::{AtomicU64, Ordering};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::{nce_update, Scratch, Trainable};
use super::params::{DenseParams, Params, SharedParams};
use super::{EmbeddingTable, Mode, TrainingConfig};
use crate::corpus::FormulaStore;
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// Resampling attempts before a negative that keeps hitting the target is dropped.
const MAX_NEGATIVE_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Mean step loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
    /// Formulae with fewer than two in-vocabulary tokens.
    pub skipped_formulae: usize,
}

struct Doc {
    formula: Option<usize>,
    tokens: Vec<usize>,
}

/// Linear decay from `start` to `end` over `total` steps.
pub(crate) struct Schedule {
    start: f64,
    end: f64,
    total: u64,
    done: AtomicU64,
}

impl Schedule {
    pub fn new(start: f64, end: f64, total: u64) -> Self {
        Self {
            start,
            end,
            total: total.max(1),
            done: AtomicU64::new(0),
        }
    }

    pub fn next(&self) -> f64 {
        let done = self.done.fetch_add(1, Ordering::Relaxed);
        let frac = (done as f64 / self.total as f64).min(1.0);
        self.start - (self.start - self.end) * frac
    }
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub(crate) fn init_rows<R: Rng>(rng: &mut R, rows: usize, dim: usize) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..rows * dim).map(|_| rng.random_range(-half..half)).collect()
}

/// Draws `k` negatives, resampling collisions with `target`.
pub(crate) fn sample_negatives<R: Rng>(rng: &mut R, vocab: &Vocabulary, target: usize, k: usize, out: &mut Vec<usize>) {
    out.clear();
    for _ in 0..k {
        for _ in 0..MAX_NEGATIVE_RESAMPLES {
            let n = vocab.sample(rng);
            if n != target {
                out.push(n);
                break;
            }
        }
    }
}

/// Context indices around `pos` with a window width drawn uniformly from `1..=window`.
pub(crate) fn window_context<R: Rng>(rng: &mut R, tokens: &[usize], pos: usize, window: usize, out: &mut Vec<usize>) {
    let b = rng.random_range(1..=window);
    let lo = pos.saturating_sub(b);
    let hi = (pos + b + 1).min(tokens.len());
    out.clear();
    out.extend_from_slice(&tokens[lo..pos]);
    out.extend_from_slice(&tokens[pos + 1..hi]);
}

fn keep_token<R: Rng>(rng: &mut R, vocab: &Vocabulary, index: usize, threshold: f64) -> bool {
    if threshold <= 0.0 {
        return true;
    }
    let f = vocab.count(index) as f64 / vocab.total() as f64;
    let keep = ((f / threshold).sqrt() + 1.0) * threshold / f;
    keep >= 1.0 || rng.random::<f64>() < keep
}

struct Pass<'a> {
    config: &'a TrainingConfig,
    vocab: &'a Vocabulary,
    schedule: &'a Schedule,
}

impl Pass<'_> {
    fn run<P: Params, R: Rng>(&self, params: &mut P, rng: &mut R, docs: &[Doc]) -> Result<(f64, u64)> {
        let mut scratch = Scratch::new(self.config.dim);
        let mut context = Vec::with_capacity(2 * self.config.window);
        let mut negatives = Vec::with_capacity(self.config.negatives);
        let mut kept = Vec::new();
        let mut loss = 0.0;
        let mut steps = 0u64;
        for doc in docs {
            let tokens: &[usize] = if self.config.subsample > 0.0 {
                kept.clear();
                kept.extend(
                    doc.tokens
                        .iter()
                        .copied()
                        .filter(|&t| keep_token(rng, self.vocab, t, self.config.subsample)),
                );
                &kept
            } else {
                &doc.tokens
            };
            if tokens.len() < 2 {
                continue;
            }
            for pos in 0..tokens.len() {
                window_context(rng, tokens, pos, self.config.window, &mut context);
                let target = tokens[pos];
                sample_negatives(rng, self.vocab, target, self.config.negatives, &mut negatives);
                let lr = self.schedule.next();
                loss += nce_update(
                    params,
                    &mut scratch,
                    doc.formula,
                    &context,
                    target,
                    &negatives,
                    lr,
                    Trainable::ALL,
                )?;
                steps += 1;
            }
        }
        Ok((loss, steps))
    }
}

fn train(
    corpus: &FormulaStore,
    vocab: &Vocabulary,
    config: &TrainingConfig,
    mode: Mode,
) -> Result<(EmbeddingTable, TrainingReport)> {
    config.validate()?;
    if config.mode != mode {
        return Err(Error::WrongMode {
            expected: mode.as_str(),
            actual: config.mode.as_str(),
        });
    }
    let with_formula = mode == Mode::Formula2vec;
    let mut docs = Vec::with_capacity(corpus.len());
    let mut skipped = 0;
    for (i, f) in corpus.iter().enumerate() {
        let tokens: Vec<usize> = f.surfaces().filter_map(|s| vocab.index_of(s)).collect();
        if tokens.len() < 2 {
            skipped += 1;
            continue;
        }
        docs.push(Doc {
            formula: with_formula.then_some(i),
            tokens,
        });
    }
    if skipped > 0 {
        warn!("{skipped} formulae have fewer than two in-vocabulary tokens and were skipped");
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input = init_rows(&mut rng, vocab.len(), dim);
    let mut context = vec![0.0; vocab.len() * dim];
    let (formula_ids, mut formula) = if with_formula {
        let ids: Vec<String> = corpus.iter().map(|f| f.id.clone()).collect();
        let rows = init_rows(&mut rng, ids.len(), dim);
        (ids, rows)
    } else {
        (Vec::new(), Vec::new())
    };

    let positions: u64 = docs.iter().map(|d| d.tokens.len() as u64).sum();
    let schedule = Schedule::new(config.lr_start, config.lr_end, positions * config.epochs as u64);
    let pass = Pass {
        config,
        vocab,
        schedule: &schedule,
    };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut total_steps = 0;

    if config.workers == 1 {
        let mut params = DenseParams {
            dim,
            input: &mut input,
            context: &mut context,
            formula: &mut formula,
        };
        for _ in 0..config.epochs {
            let (loss, steps) = pass.run(&mut params, &mut rng, &docs)?;
            epoch_losses.push(loss / steps.max(1) as f64);
            total_steps += steps;
        }
    } else {
        let shared = SharedParams::new(dim, &input, &context, &formula);
        let chunk = docs.len().div_ceil(config.workers);
        for epoch in 0..config.epochs {
            let results: Vec<Result<(f64, u64)>> = std::thread::scope(|s| {
                let handles: Vec<_> = docs
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, part)| {
                        let pass = &pass;
                        let shared = &shared;
                        s.spawn(move || {
                            let seed = splitmix(config.seed ^ splitmix(((epoch as u64) << 20) | w as u64));
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            pass.run(&mut shared.view(), &mut rng, part)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            });
            let (mut loss, mut steps) = (0.0, 0);
            for r in results {
                let (l, n) = r?;
                loss += l;
                steps += n;
            }
            epoch_losses.push(loss / steps.max(1) as f64);
            total_steps += steps;
        }
        shared.copy_out(&mut input, &mut context, &mut formula);
    }

    let table = EmbeddingTable::from_parts(config.clone(), vocab.clone(), input, context, formula_ids, formula)?;
    Ok((
        table,
        TrainingReport {
            epoch_losses,
            steps: total_steps,
            skipped_formulae: skipped,
        },
    ))
}

/// CBOW with negative sampling over every token position of the corpus.
pub fn train_symbol2vec(
    corpus: &FormulaStore,
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<(EmbeddingTable, TrainingReport)> {
    train(corpus, vocab, config, Mode::Symbol2vec)
}

/// PV-DM: every step's hidden vector averages the formula row with the context rows.
/// One formula row is produced per corpus formula, in corpus order.
pub fn train_formula2vec(
    corpus: &FormulaStore,
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<(EmbeddingTable, TrainingReport)> {
    train(corpus, vocab, config, Mode::Formula2vec)
}
