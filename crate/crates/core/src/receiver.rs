//! Receiver channels, block channels and cascades.
//!
//! Two views of a channel live here. A [`BlockChannel`] is the conditional
//! law of an output block given an input block of the same length `n`,
//! either as an exact table or as a sampler (or both). A
//! [`SequenceChannel`] acts on an input [`Tape`] positioned in time and
//! produces the output on any window of it; it is what the window and
//! mixing diagnostics operate on, since those need to move windows around
//! and change the input outside them.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::block::{self, block_index, fill_block, guarded_block_count, Tape, MAX_DENSE_BLOCKS};
use crate::permchan::{PermChannel, TypedPermChannel, Window};
use crate::{Error, Result, Symbol};

const ROW_TOL: f64 = 1e-9;
const SPEC_ROW_TOL: f64 = 1e-12;

/// Largest output space a sequence channel will tabulate exactly.
pub const MAX_LAW_BLOCKS: usize = 1 << 16;

/// Draws an index from `probs` by inversion of one uniform.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Per-symbol stochastic matrix of a discrete memoryless channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmcSpec {
    inputs: usize,
    outputs: usize,
    rows: Vec<f64>,
}

impl DmcSpec {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let inputs = rows.len();
        if inputs == 0 || inputs > 256 {
            return Err(Error::invalid("DMC needs between 1 and 256 input symbols"));
        }
        let outputs = rows[0].len();
        if outputs == 0 || outputs > 256 {
            return Err(Error::invalid("DMC needs between 1 and 256 output symbols"));
        }
        for (a, row) in rows.iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::LengthMismatch {
                    expected: outputs,
                    actual: row.len(),
                });
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid(format!("row {a} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SPEC_ROW_TOL {
                return Err(Error::invalid(format!("row {a} sums to {sum}")));
            }
        }
        Ok(DmcSpec {
            inputs,
            outputs,
            rows: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(q: usize) -> Result<Self> {
        DmcSpec::new(
            (0..q)
                .map(|a| (0..q).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("crossover {p} not in [0, 1]")));
        }
        DmcSpec::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Channel whose output law is `law` whatever the input.
    pub fn constant(inputs: usize, law: Vec<f64>) -> Result<Self> {
        DmcSpec::new(vec![law; inputs])
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn prob(&self, a: Symbol, b: Symbol) -> f64 {
        self.rows[a as usize * self.outputs + b as usize]
    }

    pub fn row(&self, a: Symbol) -> &[f64] {
        let lo = a as usize * self.outputs;
        &self.rows[lo..lo + self.outputs]
    }

    pub fn sample(&self, a: Symbol, rng: &mut dyn RngCore) -> Symbol {
        sample_index(self.row(a), rng.random::<f64>()) as Symbol
    }

    /// Per-symbol product `self` then `next`.
    pub fn then(&self, next: &DmcSpec) -> Result<DmcSpec> {
        if self.outputs != next.inputs {
            return Err(Error::AlphabetMismatch(format!(
                "{} outputs feed {} inputs",
                self.outputs, next.inputs
            )));
        }
        let rows = (0..self.inputs)
            .map(|a| {
                (0..next.outputs)
                    .map(|c| {
                        (0..self.outputs)
                            .map(|b| self.prob(a as Symbol, b as Symbol) * next.prob(b as Symbol, c as Symbol))
                            .sum()
                    })
                    .collect::<Vec<f64>>()
            })
            .map(|mut row: Vec<f64>| {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= s);
                row
            })
            .collect();
        DmcSpec::new(rows)
    }
}

/// Strict finite-memory kernel: the output at time `i` is drawn from
/// `table[x_{i-w} .. x_i]`, independently across `i` given the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMemoryKernel {
    memory: usize,
    inputs: usize,
    outputs: usize,
    table: Vec<f64>,
}

impl FiniteMemoryKernel {
    /// `table` has one row per input context `x_{i-w} .. x_i` in
    /// lexicographic order, each row a law on the output alphabet.
    pub fn new(memory: usize, inputs: usize, outputs: usize, table: Vec<Vec<f64>>) -> Result<Self> {
        let contexts = guarded_block_count(inputs, memory + 1, "kernel contexts", MAX_LAW_BLOCKS)?;
        if table.len() != contexts {
            return Err(Error::LengthMismatch {
                expected: contexts,
                actual: table.len(),
            });
        }
        for (k, row) in table.iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::LengthMismatch {
                    expected: outputs,
                    actual: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > SPEC_ROW_TOL {
                return Err(Error::invalid(format!("kernel row {k} is not stochastic")));
            }
        }
        Ok(FiniteMemoryKernel {
            memory,
            inputs,
            outputs,
            table: table.into_iter().flatten().collect(),
        })
    }

    /// Binary kernel `y_i = x_i XOR x_{i-1}`.
    pub fn xor_with_previous() -> Self {
        FiniteMemoryKernel::new(
            1,
            2,
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .expect("valid kernel")
    }

    /// Binary kernel that flips `x_i` with probability `flip[k]` where `k`
    /// is the number of ones among `x_{i-w} .. x_{i-1}`.
    pub fn binary_isi(memory: usize, flip: &[f64]) -> Result<Self> {
        if flip.len() != memory + 1 {
            return Err(Error::LengthMismatch {
                expected: memory + 1,
                actual: flip.len(),
            });
        }
        let contexts = 1usize << (memory + 1);
        let table = (0..contexts)
            .map(|ctx| {
                let current = ctx & 1;
                let ones = (ctx >> 1).count_ones() as usize;
                let p = flip[ones];
                if current == 0 {
                    vec![1.0 - p, p]
                } else {
                    vec![p, 1.0 - p]
                }
            })
            .collect();
        FiniteMemoryKernel::new(memory, 2, 2, table)
    }

    /// Memoryless kernel from a DMC.
    pub fn from_dmc(spec: &DmcSpec) -> Self {
        FiniteMemoryKernel {
            memory: 0,
            inputs: spec.inputs,
            outputs: spec.outputs,
            table: spec.rows.clone(),
        }
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Output law at a position whose context (oldest first, `w + 1`
    /// symbols) is `context`.
    pub fn law(&self, context: &[Symbol]) -> &[f64] {
        let k = block_index(context, self.inputs);
        &self.table[k * self.outputs..(k + 1) * self.outputs]
    }
}

/// Exact conditional law of a block channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactLaw {
    /// Row-major `q_in^n x q_out^n` table.
    Dense(Vec<f64>),
    /// Per-symbol product of a DMC.
    Memoryless(DmcSpec),
}

pub type BlockSamplerFn = dyn Fn(&[Symbol], &mut dyn RngCore) -> Vec<Symbol> + Send + Sync;

/// Conditional law of output blocks given input blocks of length `n`.
#[derive(Clone)]
pub struct BlockChannel {
    input_alphabet: usize,
    output_alphabet: usize,
    n: usize,
    exact: Option<ExactLaw>,
    sampler: Option<Arc<BlockSamplerFn>>,
    estimated_from: Option<usize>,
}

impl fmt::Debug for BlockChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockChannel")
            .field("input_alphabet", &self.input_alphabet)
            .field("output_alphabet", &self.output_alphabet)
            .field("n", &self.n)
            .field("exact", &self.exact.as_ref().map(|e| match e {
                ExactLaw::Dense(_) => "dense",
                ExactLaw::Memoryless(_) => "memoryless",
            }))
            .field("sampler", &self.sampler.is_some())
            .field("estimated_from", &self.estimated_from)
            .finish()
    }
}

impl BlockChannel {
    /// Exact channel from a dense row-major table; rows must be stochastic
    /// to `1e-9`.
    pub fn dense(input_alphabet: usize, output_alphabet: usize, n: usize, table: Vec<f64>) -> Result<Self> {
        let rows = guarded_block_count(input_alphabet, n, "matrix rows", MAX_DENSE_BLOCKS)?;
        let cols = guarded_block_count(output_alphabet, n, "matrix columns", MAX_DENSE_BLOCKS)?;
        if table.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: table.len(),
            });
        }
        for (r, row) in table.chunks(cols).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::invalid(format!("row {r} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::invalid(format!("row {r} sums to {sum}")));
            }
        }
        Ok(BlockChannel {
            input_alphabet,
            output_alphabet,
            n,
            exact: Some(ExactLaw::Dense(table)),
            sampler: None,
            estimated_from: None,
        })
    }

    /// Channel known only through a sampler.
    pub fn from_sampler<F>(input_alphabet: usize, output_alphabet: usize, n: usize, sampler: F) -> Self
    where
        F: Fn(&[Symbol], &mut dyn RngCore) -> Vec<Symbol> + Send + Sync + 'static,
    {
        BlockChannel {
            input_alphabet,
            output_alphabet,
            n,
            exact: None,
            sampler: Some(Arc::new(sampler)),
            estimated_from: None,
        }
    }

    /// Attaches a sampler that is used for simulation in place of the
    /// exact table (which then serves as a decoding model).
    pub fn with_sampler(mut self, sampler: Arc<BlockSamplerFn>) -> Self {
        self.sampler = Some(sampler);
        self
    }

    /// Marks the exact table as a Monte-Carlo estimate from `trials` draws.
    pub fn estimated_from(mut self, trials: usize) -> Self {
        self.estimated_from = Some(trials);
        self
    }

    pub fn input_alphabet(&self) -> usize {
        self.input_alphabet
    }

    pub fn output_alphabet(&self) -> usize {
        self.output_alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self) -> Option<&ExactLaw> {
        self.exact.as_ref()
    }

    pub fn sampler(&self) -> Option<&Arc<BlockSamplerFn>> {
        self.sampler.as_ref()
    }

    pub fn trials(&self) -> Option<usize> {
        self.estimated_from
    }

    fn check_block(&self, block: &[Symbol], q: usize) -> Result<()> {
        if block.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: block.len(),
            });
        }
        block::check_alphabet(block, q)
    }

    fn exact_or_err(&self) -> Result<&ExactLaw> {
        self.exact
            .as_ref()
            .ok_or_else(|| Error::SamplerOnly("channel has no exact law".into()))
    }

    /// `P(y | x)`.
    pub fn likelihood(&self, x: &[Symbol], y: &[Symbol]) -> Result<f64> {
        self.check_block(x, self.input_alphabet)?;
        self.check_block(y, self.output_alphabet)?;
        self.exact_or_err()?;
        Ok(self.likelihood_unchecked(x, y))
    }

    pub(crate) fn likelihood_unchecked(&self, x: &[Symbol], y: &[Symbol]) -> f64 {
        match self.exact.as_ref().expect("exact law checked by caller") {
            ExactLaw::Dense(table) => {
                let cols = self.output_alphabet.pow(self.n as u32);
                table[block_index(x, self.input_alphabet) * cols + block_index(y, self.output_alphabet)]
            }
            ExactLaw::Memoryless(spec) => x.iter().zip(y).map(|(&a, &b)| spec.prob(a, b)).product(),
        }
    }

    /// Conditional law of the output block given `x`, indexed by output
    /// block index.
    pub fn row(&self, x: &[Symbol]) -> Result<Vec<f64>> {
        self.check_block(x, self.input_alphabet)?;
        let cols = guarded_block_count(self.output_alphabet, self.n, "matrix columns", MAX_LAW_BLOCKS)?;
        match self.exact_or_err()? {
            ExactLaw::Dense(table) => {
                let r = block_index(x, self.input_alphabet);
                Ok(table[r * cols..(r + 1) * cols].to_vec())
            }
            ExactLaw::Memoryless(_) => {
                let mut y = vec![0; self.n];
                Ok((0..cols)
                    .map(|c| {
                        fill_block(c, self.output_alphabet, &mut y);
                        self.likelihood_unchecked(x, &y)
                    })
                    .collect())
            }
        }
    }

    /// Dense row-major table (materialized for memoryless laws).
    pub fn matrix(&self) -> Result<Vec<f64>> {
        let rows = guarded_block_count(self.input_alphabet, self.n, "matrix rows", MAX_DENSE_BLOCKS)?;
        guarded_block_count(self.output_alphabet, self.n, "matrix columns", MAX_DENSE_BLOCKS)?;
        match self.exact_or_err()? {
            ExactLaw::Dense(table) => Ok(table.clone()),
            ExactLaw::Memoryless(_) => {
                let mut x = vec![0; self.n];
                let mut out = Vec::new();
                for r in 0..rows {
                    fill_block(r, self.input_alphabet, &mut x);
                    out.extend(self.row(&x)?);
                }
                Ok(out)
            }
        }
    }

    /// One output block for input `x`.
    pub fn sample(&self, x: &[Symbol], rng: &mut dyn RngCore) -> Result<Vec<Symbol>> {
        self.check_block(x, self.input_alphabet)?;
        Ok(self.sample_unchecked(x, rng))
    }

    pub(crate) fn sample_unchecked(&self, x: &[Symbol], rng: &mut dyn RngCore) -> Vec<Symbol> {
        if let Some(s) = &self.sampler {
            return s(x, rng);
        }
        match self.exact.as_ref().expect("channel has a law") {
            ExactLaw::Memoryless(spec) => x.iter().map(|&a| spec.sample(a, rng)).collect(),
            ExactLaw::Dense(table) => {
                let cols = self.output_alphabet.pow(self.n as u32);
                let r = block_index(x, self.input_alphabet);
                let k = sample_index(&table[r * cols..(r + 1) * cols], rng.random::<f64>());
                block::block_at(k, self.output_alphabet, self.n)
            }
        }
    }
}

/// Memoryless block channel: the `n`-fold product of `spec`.
pub fn dmc_block(spec: &DmcSpec, n: usize) -> Result<BlockChannel> {
    if n == 0 {
        return Err(Error::pre("block length must be at least 1"));
    }
    Ok(BlockChannel {
        input_alphabet: spec.inputs(),
        output_alphabet: spec.outputs(),
        n,
        exact: Some(ExactLaw::Memoryless(spec.clone())),
        sampler: None,
        estimated_from: None,
    })
}

/// Exact law of a finite-memory channel on an extended input block whose
/// first `w` symbols are boundary context; returns the law of the last
/// `extended.len() - w` outputs.
pub fn finite_memory_output_law(kernel: &FiniteMemoryKernel, extended: &[Symbol]) -> Result<Vec<f64>> {
    let w = kernel.memory();
    if extended.len() <= w {
        return Err(Error::pre(format!(
            "need more than {w} symbols of input, got {}",
            extended.len()
        )));
    }
    block::check_alphabet(extended, kernel.inputs())?;
    let n = extended.len() - w;
    let laws: Vec<&[f64]> = (0..n).map(|i| kernel.law(&extended[i..=i + w])).collect();
    product_law(&laws, kernel.outputs())
}

fn product_law(laws: &[&[f64]], q: usize) -> Result<Vec<f64>> {
    let cols = guarded_block_count(q, laws.len(), "output law", MAX_LAW_BLOCKS)?;
    let mut out = vec![1.0; cols];
    let mut y = vec![0; laws.len()];
    for (c, slot) in out.iter_mut().enumerate() {
        fill_block(c, q, &mut y);
        for (law, &b) in laws.iter().zip(&y) {
            *slot *= law[b as usize];
        }
    }
    Ok(out)
}

/// Block channel of a finite-memory kernel. `boundary` supplies the
/// inputs preceding the block; it must hold at least `w` symbols (the last
/// `w` are used).
pub fn finite_memory_channel(kernel: &FiniteMemoryKernel, n: usize, boundary: &[Symbol]) -> Result<BlockChannel> {
    let w = kernel.memory();
    if boundary.len() < w {
        return Err(Error::pre(format!(
            "finite-memory channel needs {w} boundary symbols, got {}",
            boundary.len()
        )));
    }
    if n == 0 {
        return Err(Error::pre("block length must be at least 1"));
    }
    let rows = guarded_block_count(kernel.inputs(), n, "matrix rows", MAX_DENSE_BLOCKS)?;
    guarded_block_count(kernel.outputs(), n, "matrix columns", MAX_DENSE_BLOCKS)?;
    let ctx = &boundary[boundary.len() - w..];
    let mut extended = ctx.to_vec();
    extended.resize(w + n, 0);
    let mut table = Vec::new();
    for r in 0..rows {
        fill_block(r, kernel.inputs(), &mut extended[w..]);
        table.extend(finite_memory_output_law(kernel, &extended)?);
    }
    BlockChannel::dense(kernel.inputs(), kernel.outputs(), n, table)
}

/// Cascade `second ∘ first`: the output of `first` feeds `second`.
///
/// Exact laws compose exactly (per-symbol for two memoryless laws, matrix
/// product otherwise). When either side lacks an exact law, or carries a
/// dedicated sampler, the result samples by running both samplers.
pub fn cascade(first: &BlockChannel, second: &BlockChannel) -> Result<BlockChannel> {
    if first.output_alphabet != second.input_alphabet {
        return Err(Error::AlphabetMismatch(format!(
            "first emits {} symbols, second reads {}",
            first.output_alphabet, second.input_alphabet
        )));
    }
    if first.n != second.n {
        return Err(Error::LengthMismatch {
            expected: first.n,
            actual: second.n,
        });
    }
    let exact = match (&first.exact, &second.exact) {
        (Some(ExactLaw::Memoryless(a)), Some(ExactLaw::Memoryless(b))) => {
            Some(ExactLaw::Memoryless(a.then(b)?))
        }
        (Some(_), Some(_)) => {
            let a = first.matrix()?;
            let b = second.matrix()?;
            let rows = first.input_alphabet.pow(first.n as u32);
            let mid = first.output_alphabet.pow(first.n as u32);
            let cols = second.output_alphabet.pow(second.n as u32);
            let mut out = vec![0.0; rows * cols];
            for r in 0..rows {
                let out_row = &mut out[r * cols..(r + 1) * cols];
                for k in 0..mid {
                    let w = a[r * mid + k];
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &v) in out_row.iter_mut().zip(&b[k * cols..(k + 1) * cols]) {
                        *o += w * v;
                    }
                }
            }
            Some(ExactLaw::Dense(out))
        }
        _ => None,
    };
    let sampler: Option<Arc<BlockSamplerFn>> = if exact.is_none() || first.sampler.is_some() || second.sampler.is_some() {
        let f = first.clone();
        let s = second.clone();
        Some(Arc::new(move |x: &[Symbol], rng: &mut dyn RngCore| {
            let mid = f.sample_unchecked(x, rng);
            s.sample_unchecked(&mid, rng)
        }))
    } else {
        None
    };
    let estimated_from = match (first.estimated_from, second.estimated_from) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Ok(BlockChannel {
        input_alphabet: first.input_alphabet,
        output_alphabet: second.output_alphabet,
        n: first.n,
        exact,
        sampler,
        estimated_from,
    })
}

/// A channel acting on input sequences positioned in time.
pub trait SequenceChannel: Send + Sync {
    fn input_alphabet(&self) -> usize;

    fn output_alphabet(&self) -> usize;

    /// Input context `(before, after)` a window that its output depends on.
    fn context(&self) -> (usize, usize);

    /// Samples the output on `window` for input `tape`.
    ///
    /// Implementations consume the generator identically for every input,
    /// so reruns with a shared seed give coupled outputs.
    fn sample_window(&self, tape: &Tape, window: Range<i64>, rng: &mut dyn RngCore) -> Result<Vec<Symbol>>;

    /// Exact law of the output block on `window`, when available.
    fn window_law(&self, _tape: &Tape, _window: Range<i64>) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Some `d` when, for a fixed input, outputs at position sets more than
    /// `d` apart are independent.
    fn independence_range(&self) -> Option<usize> {
        None
    }
}

fn require_window(tape: &Tape, window: &Range<i64>) -> Result<()> {
    if window.end <= window.start {
        return Err(Error::pre("empty output window"));
    }
    if !tape.covers(window) {
        return Err(Error::pre(format!(
            "input tape {:?} does not cover window {window:?}",
            tape.range()
        )));
    }
    Ok(())
}

/// Memoryless sequence channel.
#[derive(Debug, Clone)]
pub struct Memoryless(pub DmcSpec);

impl SequenceChannel for Memoryless {
    fn input_alphabet(&self) -> usize {
        self.0.inputs()
    }

    fn output_alphabet(&self) -> usize {
        self.0.outputs()
    }

    fn context(&self) -> (usize, usize) {
        (0, 0)
    }

    fn sample_window(&self, tape: &Tape, window: Range<i64>, rng: &mut dyn RngCore) -> Result<Vec<Symbol>> {
        require_window(tape, &window)?;
        let input = tape.slice(window).expect("covered");
        Ok(input.iter().map(|&a| self.0.sample(a, rng)).collect())
    }

    fn window_law(&self, tape: &Tape, window: Range<i64>) -> Option<Result<Vec<f64>>> {
        Some(require_window(tape, &window).and_then(|_| {
            let input = tape.slice(window).expect("covered");
            let laws: Vec<&[f64]> = input.iter().map(|&a| self.0.row(a)).collect();
            product_law(&laws, self.0.outputs())
        }))
    }

    fn independence_range(&self) -> Option<usize> {
        Some(0)
    }
}

/// Finite-memory sequence channel.
#[derive(Debug, Clone)]
pub struct FiniteMemory(pub FiniteMemoryKernel);

impl FiniteMemory {
    fn extended<'a>(&self, tape: &'a Tape, window: &Range<i64>) -> Result<&'a [Symbol]> {
        if window.end <= window.start {
            return Err(Error::pre("empty output window"));
        }
        let w = self.0.memory() as i64;
        tape.slice(window.start - w..window.end).ok_or_else(|| {
            Error::pre(format!(
                "window {window:?} needs {w} symbols of boundary context; tape covers {:?}",
                tape.range()
            ))
        })
    }
}

impl SequenceChannel for FiniteMemory {
    fn input_alphabet(&self) -> usize {
        self.0.inputs()
    }

    fn output_alphabet(&self) -> usize {
        self.0.outputs()
    }

    fn context(&self) -> (usize, usize) {
        (self.0.memory(), 0)
    }

    fn sample_window(&self, tape: &Tape, window: Range<i64>, rng: &mut dyn RngCore) -> Result<Vec<Symbol>> {
        let ext = self.extended(tape, &window)?;
        let w = self.0.memory();
        Ok((0..ext.len() - w)
            .map(|i| sample_index(self.0.law(&ext[i..=i + w]), rng.random::<f64>()) as Symbol)
            .collect())
    }

    fn window_law(&self, tape: &Tape, window: Range<i64>) -> Option<Result<Vec<f64>>> {
        Some(
            self.extended(tape, &window)
                .and_then(|ext| finite_memory_output_law(&self.0, ext)),
        )
    }

    fn independence_range(&self) -> Option<usize> {
        Some(0)
    }
}

/// Sequence-level cascade: `first` feeds `second`.
#[derive(Clone)]
pub struct SequenceCascade {
    first: Arc<dyn SequenceChannel>,
    second: Arc<dyn SequenceChannel>,
}

impl SequenceCascade {
    pub fn new(first: Arc<dyn SequenceChannel>, second: Arc<dyn SequenceChannel>) -> Result<Self> {
        if first.output_alphabet() != second.input_alphabet() {
            return Err(Error::AlphabetMismatch(format!(
                "first emits {} symbols, second reads {}",
                first.output_alphabet(),
                second.input_alphabet()
            )));
        }
        Ok(SequenceCascade { first, second })
    }

    fn middle(&self, window: &Range<i64>) -> Range<i64> {
        let (before, after) = self.second.context();
        window.start - before as i64..window.end + after as i64
    }
}

impl SequenceChannel for SequenceCascade {
    fn input_alphabet(&self) -> usize {
        self.first.input_alphabet()
    }

    fn output_alphabet(&self) -> usize {
        self.second.output_alphabet()
    }

    fn context(&self) -> (usize, usize) {
        let (a0, a1) = self.first.context();
        let (b0, b1) = self.second.context();
        (a0 + b0, a1 + b1)
    }

    fn sample_window(&self, tape: &Tape, window: Range<i64>, rng: &mut dyn RngCore) -> Result<Vec<Symbol>> {
        let middle = self.middle(&window);
        let mid = self.first.sample_window(tape, middle.clone(), rng)?;
        let mid_tape = Tape::new(middle.start, mid);
        self.second.sample_window(&mid_tape, window, rng)
    }

    fn independence_range(&self) -> Option<usize> {
        let r1 = self.first.independence_range()?;
        let r2 = self.second.independence_range()?;
        let (b0, b1) = self.second.context();
        Some(r2.max(r1 + b0 + b1))
    }

    fn window_law(&self, tape: &Tape, window: Range<i64>) -> Option<Result<Vec<f64>>> {
        let middle = self.middle(&window);
        let first_law = match self.first.window_law(tape, middle.clone())? {
            Ok(l) => l,
            Err(e) => return Some(Err(e)),
        };
        let q_mid = self.first.output_alphabet();
        let q_out = self.second.output_alphabet();
        let len = (middle.end - middle.start) as usize;
        let cols = match guarded_block_count(q_out, (window.end - window.start) as usize, "output law", MAX_LAW_BLOCKS) {
            Ok(c) => c,
            Err(e) => return Some(Err(e)),
        };
        let mut out = vec![0.0; cols];
        let mut mid_tape = Tape::new(middle.start, vec![0; len]);
        let mut buf = vec![0; len];
        for (k, &p) in first_law.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            fill_block(k, q_mid, &mut buf);
            if let Err(e) = mid_tape.write(middle.start, &buf) {
                return Some(Err(e));
            }
            let second_law = match self.second.window_law(&mid_tape, window.clone())? {
                Ok(l) => l,
                Err(e) => return Some(Err(e)),
            };
            for (o, v) in out.iter_mut().zip(second_law) {
                *o += p * v;
            }
        }
        Some(Ok(out))
    }
}

/// Block channel obtained by embedding input blocks at `[0, n)` of a
/// pinned context tape and reading the output on the same window.
pub fn block_channel_from_sequence(
    channel: Arc<dyn SequenceChannel>,
    n: usize,
    context: &Tape,
) -> Result<BlockChannel> {
    let window = 0..n as i64;
    if !context.covers(&window) {
        return Err(Error::pre("context tape must cover the block window"));
    }
    let q_in = channel.input_alphabet();
    let q_out = channel.output_alphabet();
    let has_law = channel.window_law(context, window.clone()).is_some();
    let exact = if has_law {
        let rows = guarded_block_count(q_in, n, "matrix rows", MAX_DENSE_BLOCKS)?;
        guarded_block_count(q_out, n, "matrix columns", MAX_DENSE_BLOCKS)?;
        let mut tape = context.clone();
        let mut x = vec![0; n];
        let mut table = Vec::new();
        for r in 0..rows {
            fill_block(r, q_in, &mut x);
            tape.write(0, &x)?;
            table.extend(channel.window_law(&tape, window.clone()).expect("law available")?);
        }
        Some(ExactLaw::Dense(table))
    } else {
        None
    };
    let ctx = context.clone();
    let ch = channel.clone();
    let sampler: Arc<BlockSamplerFn> = Arc::new(move |x: &[Symbol], rng: &mut dyn RngCore| {
        let mut tape = ctx.clone();
        tape.write(0, x).expect("block fits the context window");
        ch.sample_window(&tape, 0..x.len() as i64, rng)
            .expect("context covers the channel's needs")
    });
    Ok(BlockChannel {
        input_alphabet: q_in,
        output_alphabet: q_out,
        n,
        sampler: if exact.is_some() { None } else { Some(sampler) },
        exact,
        estimated_from: None,
    })
}

/// The full diffusion-based molecular channel at block length
/// `receiver.n()`: arrival-order permutation on the window `[0, n)` of
/// `context` (outlier margin `margin`), then `receiver`.
///
/// For windows up to [`crate::permchan::MAX_MATRIX_WINDOW`] symbols with an
/// enumerable alphabet the result carries a Monte-Carlo estimate of the
/// exact matrix from `trials` simulated orders; it always carries a sampler
/// that simulates the physical channel.
pub fn molecular_channel<R: Rng + ?Sized>(
    perm: &PermChannel,
    margin: usize,
    receiver: &BlockChannel,
    context: &Tape,
    trials: usize,
    rng: &mut R,
) -> Result<BlockChannel> {
    let n = receiver.n();
    let q = receiver.input_alphabet();
    let window = Window::new(0, n, margin)?;
    let enumerable = n <= crate::permchan::MAX_MATRIX_WINDOW
        && block::block_count(q, n).is_some_and(|c| c <= MAX_DENSE_BLOCKS);
    let perm_block = if enumerable {
        perm.block_matrix(context, &window, q, trials, rng)?
    } else {
        let sampler = perm.block_sampler(context, &window);
        BlockChannel::from_sampler(q, q, n, move |x, rng| sampler(x, rng))
    };
    cascade(&perm_block, receiver)
}

/// Sequence-level molecular channel: the arrival-order permutation on an
/// alphabet of `alphabet` symbols followed by `receiver`.
pub fn molecular_sequence_channel(
    perm: &PermChannel,
    alphabet: usize,
    receiver: Arc<dyn SequenceChannel>,
) -> Result<SequenceCascade> {
    SequenceCascade::new(Arc::new(TypedPermChannel { perm: *perm, alphabet }), receiver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn dmc_validation() {
        assert!(DmcSpec::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(DmcSpec::new(vec![vec![1.5, -0.5]]).is_err());
        assert!(DmcSpec::new(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
        assert!(DmcSpec::bsc(1.2).is_err());
    }

    #[test]
    fn identity_block_matrix() {
        let ch = dmc_block(&DmcSpec::identity(2).unwrap(), 3).unwrap();
        let m = ch.matrix().unwrap();
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(m[r * 8 + c], if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn bsc_block_entries() {
        let p = 0.1;
        let one = dmc_block(&DmcSpec::bsc(p).unwrap(), 1).unwrap();
        assert!(close(&one.matrix().unwrap(), &[0.9, 0.1, 0.1, 0.9], 1e-15));
        let two = dmc_block(&DmcSpec::bsc(p).unwrap(), 2).unwrap();
        assert!((two.likelihood(&[0, 0], &[0, 0]).unwrap() - 0.81).abs() < 1e-15);
    }

    #[test]
    fn xor_kernel_by_hand() {
        let k = FiniteMemoryKernel::xor_with_previous();
        let ch = finite_memory_channel(&k, 4, &[0]).unwrap();
        let row = ch.row(&[0, 1, 1, 0]).unwrap();
        let y = block_index(&[0, 1, 0, 1], 2);
        assert_eq!(row[y], 1.0);
        assert!(finite_memory_channel(&k, 4, &[]).is_err());
    }

    #[test]
    fn zero_memory_matches_dmc() {
        let spec = DmcSpec::bsc(0.2).unwrap();
        let fm = finite_memory_channel(&FiniteMemoryKernel::from_dmc(&spec), 3, &[]).unwrap();
        let dmc = dmc_block(&spec, 3).unwrap();
        assert!(close(&fm.matrix().unwrap(), &dmc.matrix().unwrap(), 1e-15));
    }

    #[test]
    fn bsc_cascade() {
        let a = dmc_block(&DmcSpec::bsc(0.1).unwrap(), 1).unwrap();
        let b = dmc_block(&DmcSpec::bsc(0.2).unwrap(), 1).unwrap();
        let c = cascade(&a, &b).unwrap();
        let expected = dmc_block(&DmcSpec::bsc(0.26).unwrap(), 1).unwrap();
        assert!(close(&c.matrix().unwrap(), &expected.matrix().unwrap(), 1e-12));
    }

    #[test]
    fn cascade_mismatch_errors() {
        let a = dmc_block(&DmcSpec::bsc(0.1).unwrap(), 2).unwrap();
        let b = dmc_block(&DmcSpec::bsc(0.1).unwrap(), 3).unwrap();
        assert!(cascade(&a, &b).is_err());
        let c = dmc_block(&DmcSpec::identity(3).unwrap(), 2).unwrap();
        assert!(matches!(cascade(&a, &c), Err(Error::AlphabetMismatch(_))));
    }

    #[test]
    fn sampler_only_has_no_likelihood() {
        let ch = BlockChannel::from_sampler(2, 2, 2, |x, _| x.to_vec());
        assert!(matches!(ch.likelihood(&[0, 1], &[0, 1]), Err(Error::SamplerOnly(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ch.sample(&[0, 1], &mut rng).unwrap(), vec![0, 1]);
    }

    #[test]
    fn dense_guard() {
        let r = BlockChannel::dense(2, 2, 13, vec![]);
        assert!(matches!(r, Err(Error::Guard { .. })));
    }

    #[test]
    fn sequence_cascade_law_matches_blocks() {
        let bsc = DmcSpec::bsc(0.1).unwrap();
        let casc = SequenceCascade::new(
            Arc::new(FiniteMemory(FiniteMemoryKernel::xor_with_previous())),
            Arc::new(Memoryless(bsc.clone())),
        )
        .unwrap();
        let tape = Tape::new(-1, vec![0, 1, 1, 0, 1]);
        let law = casc.window_law(&tape, 0..4).unwrap().unwrap();
        let xor_row = finite_memory_channel(&FiniteMemoryKernel::xor_with_previous(), 4, &[0])
            .unwrap();
        let composed = cascade(&xor_row, &dmc_block(&bsc, 4).unwrap()).unwrap();
        assert!(close(&law, &composed.row(&[1, 1, 0, 1]).unwrap(), 1e-12));
    }
}
