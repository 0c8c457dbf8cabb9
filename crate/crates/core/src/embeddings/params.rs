//! Row-level access to the three parameter blocks, shared by the
//! single-worker trainer, the lock-free parallel trainer and inference.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    Input,
    Context,
    Formula,
}

pub(crate) trait Params {
    fn read(&self, block: Block, row: usize, out: &mut [f64]);
    /// `row += scale * x`
    fn add(&mut self, block: Block, row: usize, scale: f64, x: &[f64]);
}

pub(crate) struct DenseParams<'a> {
    pub dim: usize,
    pub input: &'a mut [f64],
    pub context: &'a mut [f64],
    pub formula: &'a mut [f64],
}

impl DenseParams<'_> {
    fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::Input => self.input,
            Block::Context => self.context,
            Block::Formula => self.formula,
        }
    }
}

impl Params for DenseParams<'_> {
    fn read(&self, block: Block, row: usize, out: &mut [f64]) {
        let d = self.dim;
        out.copy_from_slice(&self.block(block)[row * d..(row + 1) * d]);
    }

    fn add(&mut self, block: Block, row: usize, scale: f64, x: &[f64]) {
        let d = self.dim;
        let data = match block {
            Block::Input => &mut *self.input,
            Block::Context => &mut *self.context,
            Block::Formula => &mut *self.formula,
        };
        for (p, g) in data[row * d..(row + 1) * d].iter_mut().zip(x) {
            *p += scale * g;
        }
    }
}

/// Parameters stored as relaxed atomics so several workers can update them
/// without locks. Concurrent read-modify-write may lose updates.
pub(crate) struct SharedParams {
    pub dim: usize,
    input: Vec<AtomicU64>,
    context: Vec<AtomicU64>,
    formula: Vec<AtomicU64>,
}

fn to_atomic(v: &[f64]) -> Vec<AtomicU64> {
    v.iter().map(|x| AtomicU64::new(x.to_bits())).collect()
}

fn from_atomic(v: &[AtomicU64], out: &mut [f64]) {
    for (o, a) in out.iter_mut().zip(v) {
        *o = f64::from_bits(a.load(Ordering::Relaxed));
    }
}

impl SharedParams {
    pub fn new(dim: usize, input: &[f64], context: &[f64], formula: &[f64]) -> Self {
        Self {
            dim,
            input: to_atomic(input),
            context: to_atomic(context),
            formula: to_atomic(formula),
        }
    }

    pub fn copy_out(&self, input: &mut [f64], context: &mut [f64], formula: &mut [f64]) {
        from_atomic(&self.input, input);
        from_atomic(&self.context, context);
        from_atomic(&self.formula, formula);
    }

    fn block(&self, block: Block) -> &[AtomicU64] {
        match block {
            Block::Input => &self.input,
            Block::Context => &self.context,
            Block::Formula => &self.formula,
        }
    }

    pub fn view(&self) -> SharedView<'_> {
        SharedView(self)
    }
}

pub(crate) struct SharedView<'a>(&'a SharedParams);

impl Params for SharedView<'_> {
    fn read(&self, block: Block, row: usize, out: &mut [f64]) {
        let d = self.0.dim;
        from_atomic(&self.0.block(block)[row * d..(row + 1) * d], out);
    }

    fn add(&mut self, block: Block, row: usize, scale: f64, x: &[f64]) {
        let d = self.0.dim;
        for (a, g) in self.0.block(block)[row * d..(row + 1) * d].iter().zip(x) {
            let cur = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + scale * g).to_bits(), Ordering::Relaxed);
        }
    }
}
