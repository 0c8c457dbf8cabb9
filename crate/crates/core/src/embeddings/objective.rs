//! Negative-sampling objective and the single SGD step used by every trainer.
//!
//! For hidden vector `h`, positive output row `u⁺` and negative rows `uₙ`:
//!
//! ```text
//! L = −log σ(u⁺·h) − Σₙ log σ(−uₙ·h)
//! ∂L/∂h  = (σ(u⁺·h) − 1)·u⁺ + Σₙ σ(uₙ·h)·uₙ
//! ∂L/∂u⁺ = (σ(u⁺·h) − 1)·h
//! ∂L/∂uₙ = σ(uₙ·h)·h
//! ```
//!
//! `h` is the mean of the input rows (context tokens, plus the formula row in
//! PV-DM), so each input row receives `∂L/∂h / n`.

use super::params::{Block, DenseParams, Params};
use super::EmbeddingTable;
use crate::error::{Error, Result};

/// Pre-activations are clamped to ±this value inside the loss.
pub const PREACTIVATION_CLAMP: f64 = 30.0;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn term_loss(x: f64, positive: bool) -> f64 {
    let x = x.clamp(-PREACTIVATION_CLAMP, PREACTIVATION_CLAMP);
    if positive {
        -log_sigmoid(x)
    } else {
        -log_sigmoid(-x)
    }
}

/// Negative-sampling loss for one (hidden, positive, negatives) triple.
pub fn nce_loss(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> Result<f64> {
    let d = center.len();
    for v in std::iter::once(positive).chain(negatives.iter().copied()) {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: v.len(),
            });
        }
    }
    let mut loss = term_loss(dot(positive, center), true);
    for n in negatives {
        loss += term_loss(dot(n, center), false);
    }
    Ok(loss)
}

/// Which parameter blocks a step may modify.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Trainable {
    pub inputs: bool,
    pub outputs: bool,
    pub formula: bool,
}

impl Trainable {
    pub const ALL: Trainable = Trainable {
        inputs: true,
        outputs: true,
        formula: true,
    };
    pub const FORMULA_ONLY: Trainable = Trainable {
        inputs: false,
        outputs: false,
        formula: true,
    };
}

pub(crate) struct Scratch {
    h: Vec<f64>,
    grad_h: Vec<f64>,
    row: Vec<f64>,
    outputs: Vec<(usize, f64)>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Self {
            h: vec![0.0; dim],
            grad_h: vec![0.0; dim],
            row: vec![0.0; dim],
            outputs: Vec::new(),
        }
    }
}

/// One SGD step on the negative-sampling loss. All gradients are taken at
/// the pre-update parameters; the returned loss is the pre-update loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn nce_update<P: Params>(
    params: &mut P,
    scratch: &mut Scratch,
    formula: Option<usize>,
    context: &[usize],
    target: usize,
    negatives: &[usize],
    lr: f64,
    trainable: Trainable,
) -> Result<f64> {
    let n_inputs = context.len() + usize::from(formula.is_some());
    if n_inputs == 0 {
        return Err(Error::EmptyContext);
    }
    let Scratch {
        h,
        grad_h,
        row,
        outputs,
    } = scratch;
    let inv = 1.0 / n_inputs as f64;

    h.iter_mut().for_each(|x| *x = 0.0);
    if let Some(f) = formula {
        params.read(Block::Formula, f, row);
        h.iter_mut().zip(row.iter()).for_each(|(a, b)| *a += b);
    }
    for &c in context {
        params.read(Block::Input, c, row);
        h.iter_mut().zip(row.iter()).for_each(|(a, b)| *a += b);
    }
    h.iter_mut().for_each(|x| *x *= inv);

    grad_h.iter_mut().for_each(|x| *x = 0.0);
    outputs.clear();
    let mut loss = 0.0;
    for (idx, positive) in std::iter::once((target, true)).chain(negatives.iter().map(|&n| (n, false))) {
        params.read(Block::Context, idx, row);
        let x = dot(row, h);
        loss += term_loss(x, positive);
        let g = sigmoid(x) - if positive { 1.0 } else { 0.0 };
        grad_h.iter_mut().zip(row.iter()).for_each(|(a, u)| *a += g * u);
        outputs.push((idx, g));
    }

    if lr != 0.0 {
        if trainable.outputs {
            for &(idx, g) in outputs.iter() {
                params.add(Block::Context, idx, -lr * g, h);
            }
        }
        let scale = -lr * inv;
        if trainable.inputs {
            for &c in context {
                params.add(Block::Input, c, scale, grad_h);
            }
        }
        if trainable.formula {
            if let Some(f) = formula {
                params.add(Block::Formula, f, scale, grad_h);
            }
        }
    }
    Ok(loss)
}

fn check_rows(table: &EmbeddingTable, context: &[usize], target: usize, negatives: &[usize]) -> Result<()> {
    let v = table.vocab().len();
    if let Some(&bad) = context
        .iter()
        .chain(std::iter::once(&target))
        .chain(negatives)
        .find(|&&i| i >= v)
    {
        return Err(Error::InvalidConfig(format!(
            "token index {bad} outside vocabulary of {v}"
        )));
    }
    Ok(())
}

/// CBOW step: `h` is the mean of the context rows. Returns the pre-update loss.
pub fn cbow_step(
    table: &mut EmbeddingTable,
    context: &[usize],
    target: usize,
    negatives: &[usize],
    lr: f64,
) -> Result<f64> {
    if context.is_empty() {
        return Err(Error::EmptyContext);
    }
    check_rows(table, context, target, negatives)?;
    let dim = table.dim();
    let (input, ctx, formula) = table.raw_mut();
    let mut params = DenseParams {
        dim,
        input,
        context: ctx,
        formula,
    };
    nce_update(
        &mut params,
        &mut Scratch::new(dim),
        None,
        context,
        target,
        negatives,
        lr,
        Trainable::ALL,
    )
}

/// PV-DM step: `h` is the mean of the formula row and the context rows.
pub fn pvdm_step(
    table: &mut EmbeddingTable,
    formula: usize,
    context: &[usize],
    target: usize,
    negatives: &[usize],
    lr: f64,
) -> Result<f64> {
    check_rows(table, context, target, negatives)?;
    if formula >= table.formula_count() {
        return Err(Error::InvalidConfig(format!(
            "formula index {formula} outside table of {}",
            table.formula_count()
        )));
    }
    let dim = table.dim();
    let (input, ctx, fvec) = table.raw_mut();
    let mut params = DenseParams {
        dim,
        input,
        context: ctx,
        formula: fvec,
    };
    nce_update(
        &mut params,
        &mut Scratch::new(dim),
        Some(formula),
        context,
        target,
        negatives,
        lr,
        Trainable::ALL,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::TrainingConfig;
    use crate::vocab::Vocabulary;

    fn table(dim: usize, input: Vec<f64>, context: Vec<f64>) -> EmbeddingTable {
        let v = input.len() / dim;
        let vocab = Vocabulary::from_counts((0..v).map(|i| (format!("t{i}"), 10 + i as u64)), 1, 0.75).unwrap();
        let cfg = TrainingConfig {
            dim,
            ..TrainingConfig::symbol2vec()
        };
        EmbeddingTable::from_parts(cfg, vocab, input, context, vec![], vec![]).unwrap()
    }

    #[test]
    fn zero_vectors_give_ln2_per_term() {
        let z = [0.0; 4];
        let negs: Vec<&[f64]> = vec![&z; 5];
        let l = nce_loss(&z, &z, &negs).unwrap();
        assert!((l - 6.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 4.1589).abs() < 1e-4);
    }

    #[test]
    fn saturated_loss_goes_to_zero() {
        let h = [100.0, 0.0];
        let pos = [100.0, 0.0];
        let neg = [-100.0, 0.0];
        let l = nce_loss(&h, &pos, &[&neg, &neg]).unwrap();
        assert!((0.0..1e-12).contains(&l), "{l}");
    }

    #[test]
    fn hand_evaluated_loss() {
        let l = nce_loss(&[1.0, 0.0], &[1.0, 0.0], &[&[1.0, 0.0]]).unwrap();
        // -ln σ(1) - ln σ(-1) = 0.31326 + 1.31326
        assert!((l - 1.626_523).abs() < 1e-6, "{l}");
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            nce_loss(&[1.0, 0.0], &[1.0], &[]),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((log_sigmoid(1.0) - sigmoid(1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn hidden_gradient_has_closed_form() {
        // two context tokens, dim 2: step with lr on inputs and compare the
        // per-row change with (σ(u⁺·h)−1)u⁺ + Σσ(uₙ·h)uₙ divided by 2.
        let input = vec![0.3, -0.2, 0.1, 0.4, 0.0, 0.0, 0.0, 0.0];
        let context = vec![0.0, 0.0, 0.0, 0.0, 0.5, -0.1, -0.3, 0.2];
        let mut t = table(2, input.clone(), context.clone());
        let h = [(0.3 + 0.1) / 2.0, (-0.2 + 0.4) / 2.0];
        let (up, un) = ([0.5, -0.1], [-0.3, 0.2]);
        let sp = sigmoid(up[0] * h[0] + up[1] * h[1]);
        let sn = sigmoid(un[0] * h[0] + un[1] * h[1]);
        let grad_h = [(sp - 1.0) * up[0] + sn * un[0], (sp - 1.0) * up[1] + sn * un[1]];
        let lr = 0.1;
        cbow_step(&mut t, &[0, 1], 2, &[3], lr).unwrap();
        for row in 0..2 {
            for k in 0..2 {
                let delta = t.input_vector(row)[k] - input[row * 2 + k];
                assert!((delta + lr * grad_h[k] / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_table_unchanged() {
        let mut t = table(3, vec![0.1; 12], vec![0.2; 12]);
        let before = t.clone();
        let loss = cbow_step(&mut t, &[0, 1], 2, &[3], 0.0).unwrap();
        assert!(loss > 0.0);
        assert_eq!(t, before);
    }

    #[test]
    fn empty_context_is_an_error() {
        let mut t = table(2, vec![0.1; 4], vec![0.2; 4]);
        assert!(matches!(cbow_step(&mut t, &[], 0, &[1], 0.1), Err(Error::EmptyContext)));
    }
}
