//! The permutation channel induced by the arrival order of messages.
//!
//! Output position `p` carries the symbol of whichever transmission arrived
//! `p`-th. Arrival order is only ever simulated over a finite stretch of
//! transmissions: a [`Window`] of `len` output positions, its outlier margin
//! `m′` on each side, and a further `guard` of transmissions on each side so
//! that far-away messages can still overtake into the window.
//!
//! Ranks are oriented by time: rank 1 is the earliest arrival among the
//! selected indices. Ties (possible only through floating point) go to the
//! smaller transmission index.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::block::{block_index, guarded_block_count, Tape, MAX_DENSE_BLOCKS};
use crate::fpt::{fill_arrivals, ArrivalSequence, FptModel, Schedule};
use crate::mc;
use crate::receiver::{BlockChannel, BlockSamplerFn, SequenceChannel};
use crate::{Error, Result, Symbol};

/// Largest window a block matrix is built for.
pub const MAX_MATRIX_WINDOW: usize = 6;

/// Trial count below which estimated distributions are flagged.
pub const MIN_CONFIDENT_TRIALS: usize = 10_000;

/// Output window `[start, start + len)` with outlier margin `margin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    start: i64,
    len: usize,
    margin: usize,
}

impl Window {
    pub fn new(start: i64, len: usize, margin: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("window length must be at least 1"));
        }
        Ok(Window { start, len, margin })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn with_margin(&self, margin: usize) -> Window {
        Window { margin, ..*self }
    }

    pub fn shifted(&self, by: i64) -> Window {
        Window {
            start: self.start + by,
            ..*self
        }
    }

    pub fn range(&self) -> Range<i64> {
        self.start..self.start + self.len as i64
    }

    /// `[start - m′, start + len + m′)`.
    pub fn extended(&self) -> Range<i64> {
        let m = self.margin as i64;
        self.start - m..self.start + self.len as i64 + m
    }
}

/// Local version of a permutation on a finite index set: `ranks[i]` is the
/// 1-based arrival rank of transmission `indices[i]` among the selected
/// indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LocalPermutation {
    indices: Vec<i64>,
    ranks: Vec<usize>,
}

impl LocalPermutation {
    pub fn new(indices: Vec<i64>, ranks: Vec<usize>) -> Result<Self> {
        if indices.len() != ranks.len() {
            return Err(Error::LengthMismatch {
                expected: indices.len(),
                actual: ranks.len(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("indices must be strictly increasing"));
        }
        let k = ranks.len();
        let mut seen = vec![false; k];
        for &r in &ranks {
            if r == 0 || r > k || seen[r - 1] {
                return Err(Error::invalid(format!("ranks {ranks:?} are not a permutation of 1..={k}")));
            }
            seen[r - 1] = true;
        }
        Ok(LocalPermutation { indices, ranks })
    }

    pub fn identity(indices: Vec<i64>) -> Result<Self> {
        let ranks = (1..=indices.len()).collect();
        LocalPermutation::new(indices, ranks)
    }

    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.ranks.iter().enumerate().all(|(i, &r)| r == i + 1)
    }

    pub fn inverse(&self) -> LocalPermutation {
        let mut inv = vec![0; self.ranks.len()];
        for (i, &r) in self.ranks.iter().enumerate() {
            inv[r - 1] = i + 1;
        }
        LocalPermutation {
            indices: self.indices.clone(),
            ranks: inv,
        }
    }
}

/// Local permutation of the 1-based `indices` of `arrivals`, ranked by
/// arrival time (earliest first, ties to the smaller index).
pub fn order_to_local_permutation(arrivals: &ArrivalSequence, indices: &[usize]) -> Result<LocalPermutation> {
    if indices.is_empty() {
        return Err(Error::pre("index set must be nonempty"));
    }
    let n = arrivals.len();
    if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > n) {
        return Err(Error::pre(format!("index {bad} outside 1..={n}")));
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != indices.len() {
        return Err(Error::pre("index set has duplicates"));
    }
    let times = arrivals.times();
    let ranks = rank_by_time(sorted.iter().map(|&i| (times[i - 1], i as i64)));
    LocalPermutation::new(sorted.into_iter().map(|i| i as i64).collect(), ranks)
}

/// 1-based ranks of `(time, index)` pairs, given in index order.
fn rank_by_time(items: impl Iterator<Item = (f64, i64)>) -> Vec<usize> {
    let items: Vec<(f64, i64)> = items.collect();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        items[a]
            .0
            .total_cmp(&items[b].0)
            .then(items[a].1.cmp(&items[b].1))
    });
    let mut ranks = vec![0; items.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Reorders a block: output position `ranks[i]` receives `block[i]`.
pub fn apply_permutation<T: Clone>(block: &[T], perm: &LocalPermutation) -> Result<Vec<T>> {
    if block.len() != perm.len() {
        return Err(Error::LengthMismatch {
            expected: perm.len(),
            actual: block.len(),
        });
    }
    let mut out: Vec<Option<T>> = vec![None; block.len()];
    for (x, &r) in block.iter().zip(perm.ranks()) {
        out[r - 1] = Some(x.clone());
    }
    Ok(out.into_iter().map(|x| x.expect("bijection")).collect())
}

/// One simulated arrival order over a stretch of transmissions.
#[derive(Debug, Clone)]
pub struct ArrivalOrder {
    start: i64,
    /// `sources[p]` is the transmission received at output position
    /// `start + p`.
    sources: Vec<i64>,
}

impl ArrivalOrder {
    pub fn range(&self) -> Range<i64> {
        self.start..self.start + self.sources.len() as i64
    }

    /// Transmission received at output position `p`.
    pub fn source(&self, p: i64) -> i64 {
        self.sources[(p - self.start) as usize]
    }

    pub fn sources(&self, window: Range<i64>) -> &[i64] {
        let lo = (window.start - self.start) as usize;
        let hi = (window.end - self.start) as usize;
        &self.sources[lo..hi]
    }

    /// Whether some output position of `window` is fed from outside its
    /// extended range.
    pub fn is_outlier(&self, window: &Window) -> bool {
        let ext = window.extended();
        self.sources(window.range()).iter().any(|s| !ext.contains(s))
    }

    /// Local permutation of the window's extended index set.
    pub fn local_permutation(&self, window: &Window) -> LocalPermutation {
        let ext = window.extended();
        let mut ranks = vec![0; (ext.end - ext.start) as usize];
        let mut r = 0;
        for &s in &self.sources {
            if ext.contains(&s) {
                r += 1;
                ranks[(s - ext.start) as usize] = r;
            }
        }
        LocalPermutation {
            indices: ext.collect(),
            ranks,
        }
    }
}

/// Permutation channel parameters: first-passage law, release schedule and
/// the number of extra transmissions simulated on each side of a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermChannel {
    model: FptModel,
    schedule: Schedule,
    guard: usize,
}

impl PermChannel {
    pub fn new(model: FptModel, schedule: Schedule, guard: usize) -> Result<Self> {
        schedule.validate()?;
        Ok(PermChannel {
            model,
            schedule,
            guard,
        })
    }

    pub fn model(&self) -> &FptModel {
        &self.model
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn guard(&self) -> usize {
        self.guard
    }

    pub fn with_guard(&self, guard: usize) -> PermChannel {
        PermChannel { guard, ..*self }
    }

    /// Transmissions simulated for `window`.
    pub fn simulated_range(&self, window: &Window) -> Range<i64> {
        let ext = window.extended();
        let g = self.guard as i64;
        ext.start - g..ext.end + g
    }

    /// Simulates the arrival order of the transmissions in `range`.
    pub fn simulate(&self, range: Range<i64>, rng: &mut dyn RngCore) -> ArrivalOrder {
        let count = (range.end - range.start).max(0) as usize;
        let mut times = Vec::with_capacity(count);
        fill_arrivals(count, &self.schedule, &self.model, rng, &mut times);
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
        ArrivalOrder {
            start: range.start,
            sources: order.into_iter().map(|k| range.start + k as i64).collect(),
        }
    }

    fn check_covers(x: &Tape, window: &Window) -> Result<()> {
        let ext = window.extended();
        if !x.covers(&ext) {
            return Err(Error::pre(format!(
                "input {:?} does not cover the extended window {ext:?}",
                x.range()
            )));
        }
        Ok(())
    }

    /// One pass through the channel: the output block on the window, the
    /// local permutation of the extended index set, and the outlier flag.
    ///
    /// Outlier draws still produce an output from the realized order.
    /// Transmissions outside the input tape carry symbol 0.
    pub fn sample_output(
        &self,
        x: &Tape,
        window: &Window,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<Symbol>, LocalPermutation, bool)> {
        PermChannel::check_covers(x, window)?;
        let order = self.simulate(self.simulated_range(window), rng);
        let out = order
            .sources(window.range())
            .iter()
            .map(|&s| x.get_or(s, 0))
            .collect();
        Ok((out, order.local_permutation(window), order.is_outlier(window)))
    }

    /// Empirical law of local permutations of the extended index set.
    ///
    /// The arrival order does not depend on the input symbols, so `x` only
    /// fixes the extent that must be available.
    pub fn estimate_gamma<R: Rng + ?Sized>(
        &self,
        x: &Tape,
        window: &Window,
        trials: usize,
        rng: &mut R,
    ) -> Result<PermDistribution> {
        PermChannel::check_covers(x, window)?;
        if trials == 0 {
            return Err(Error::pre("trials must be at least 1"));
        }
        let base = mc::derive_seed(rng);
        let range = self.simulated_range(window);
        let (counts, outliers) = mc::fold_trials(
            base,
            trials,
            || (BTreeMap::<LocalPermutation, usize>::new(), 0usize),
            |(counts, outliers), _, rng| {
                let order = self.simulate(range.clone(), rng);
                if order.is_outlier(window) {
                    *outliers += 1;
                } else {
                    *counts.entry(order.local_permutation(window)).or_default() += 1;
                }
            },
            |(mut a, oa), (b, ob)| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                (a, oa + ob)
            },
        );
        let total = trials as f64;
        Ok(PermDistribution {
            window: *window,
            support: counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect(),
            outlier_mass: outliers as f64 / total,
            trials,
            low_confidence: trials < MIN_CONFIDENT_TRIALS,
        })
    }

    /// Outlier frequency for each margin in `margins`, all estimated from
    /// the same simulated orders so the curve is monotone by construction.
    pub fn outlier_prob<R: Rng + ?Sized>(
        &self,
        x: &Tape,
        window: &Window,
        margins: &[usize],
        trials: usize,
        rng: &mut R,
    ) -> Result<Vec<OutlierPoint>> {
        let widest = *margins
            .iter()
            .max()
            .ok_or_else(|| Error::pre("margin scan must be nonempty"))?;
        PermChannel::check_covers(x, &window.with_margin(widest))?;
        if trials == 0 {
            return Err(Error::pre("trials must be at least 1"));
        }
        let base = mc::derive_seed(rng);
        let range = self.simulated_range(&window.with_margin(widest));
        let windows: Vec<Window> = margins.iter().map(|&m| window.with_margin(m)).collect();
        let hits = mc::fold_trials(
            base,
            trials,
            || vec![0usize; windows.len()],
            |hits, _, rng| {
                let order = self.simulate(range.clone(), rng);
                for (h, w) in hits.iter_mut().zip(&windows) {
                    if order.is_outlier(w) {
                        *h += 1;
                    }
                }
            },
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
        Ok(margins
            .iter()
            .zip(hits)
            .map(|(&margin, h)| {
                let p = h as f64 / trials as f64;
                OutlierPoint {
                    margin,
                    p_hat: p,
                    se: mc::bernoulli_se(p, trials),
                }
            })
            .collect())
    }

    /// Estimated block channel on `window`: row `u` is the law of the
    /// output block when `u` is written into the window of `context`.
    ///
    /// One set of simulated orders is shared by every row. The matrix
    /// carries a sampler that re-simulates the channel.
    pub fn block_matrix<R: Rng + ?Sized>(
        &self,
        context: &Tape,
        window: &Window,
        alphabet: usize,
        trials: usize,
        rng: &mut R,
    ) -> Result<BlockChannel> {
        if window.len() > MAX_MATRIX_WINDOW {
            return Err(Error::Guard {
                guard: "window length",
                limit: MAX_MATRIX_WINDOW,
                actual: window.len(),
            });
        }
        PermChannel::check_covers(context, window)?;
        crate::block::check_alphabet(context.symbols(), alphabet)?;
        if trials == 0 {
            return Err(Error::pre("trials must be at least 1"));
        }
        let n = window.len();
        let rows = guarded_block_count(alphabet, n, "matrix rows", MAX_DENSE_BLOCKS)?;
        let base = mc::derive_seed(rng);
        let range = self.simulated_range(window);
        let patterns = mc::fold_trials(
            base,
            trials,
            BTreeMap::<Vec<i64>, usize>::new,
            |counts, _, rng| {
                let order = self.simulate(range.clone(), rng);
                *counts.entry(order.sources(window.range()).to_vec()).or_default() += 1;
            },
            |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                a
            },
        );
        let mut table = vec![0.0; rows * rows];
        let mut tape = context.clone();
        let mut u = vec![0; n];
        let mut y = vec![0; n];
        for r in 0..rows {
            crate::block::fill_block(r, alphabet, &mut u);
            tape.write(window.start(), &u)?;
            for (sources, &count) in &patterns {
                for (slot, &s) in y.iter_mut().zip(sources) {
                    *slot = tape.get_or(s, 0);
                }
                table[r * rows + block_index(&y, alphabet)] += count as f64;
            }
        }
        let total = trials as f64;
        table.iter_mut().for_each(|p| *p /= total);
        Ok(BlockChannel::dense(alphabet, alphabet, n, table)?
            .estimated_from(trials)
            .with_sampler(self.block_sampler(context, window)))
    }

    /// Sampler of the output block on `window` for an input block written
    /// into `context`.
    pub fn block_sampler(&self, context: &Tape, window: &Window) -> Arc<BlockSamplerFn> {
        let perm = *self;
        let ctx = context.clone();
        let window = *window;
        Arc::new(move |u: &[Symbol], rng: &mut dyn RngCore| {
            let mut tape = ctx.clone();
            tape.write(window.start(), u).expect("block fits the window");
            let order = perm.simulate(perm.simulated_range(&window), rng);
            order
                .sources(window.range())
                .iter()
                .map(|&s| tape.get_or(s, 0))
                .collect()
        })
    }
}

/// A permutation channel with a declared symbol alphabet.
#[derive(Debug, Clone, Copy)]
pub struct TypedPermChannel {
    pub perm: PermChannel,
    pub alphabet: usize,
}

impl SequenceChannel for TypedPermChannel {
    fn input_alphabet(&self) -> usize {
        self.alphabet
    }

    fn output_alphabet(&self) -> usize {
        self.alphabet
    }

    fn context(&self) -> (usize, usize) {
        (self.perm.guard, self.perm.guard)
    }

    /// Simulates transmissions `guard` beyond each side of the window;
    /// positions outside the tape carry symbol 0.
    fn sample_window(&self, tape: &Tape, window: Range<i64>, rng: &mut dyn RngCore) -> Result<Vec<Symbol>> {
        if window.end <= window.start || !tape.covers(&window) {
            return Err(Error::pre(format!(
                "input tape {:?} does not cover window {window:?}",
                tape.range()
            )));
        }
        let g = self.perm.guard as i64;
        let order = self.perm.simulate(window.start - g..window.end + g, rng);
        Ok(order.sources(window).iter().map(|&s| tape.get_or(s, 0)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierPoint {
    pub margin: usize,
    pub p_hat: f64,
    pub se: f64,
}

/// Empirical law of local permutations on a window's extended index set,
/// with the outlier draws set apart.
#[derive(Debug, Clone, PartialEq)]
pub struct PermDistribution {
    pub window: Window,
    pub support: BTreeMap<LocalPermutation, f64>,
    pub outlier_mass: f64,
    pub trials: usize,
    /// Set when fewer than [`MIN_CONFIDENT_TRIALS`] trials back the estimate.
    pub low_confidence: bool,
}

impl PermDistribution {
    pub fn prob(&self, perm: &LocalPermutation) -> f64 {
        self.support.get(perm).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.support.values().sum::<f64>() + self.outlier_mass
    }

    /// Standard error of the cell estimate for `perm`; never above
    /// `(4 trials)^(-1/2)`.
    pub fn standard_error(&self, perm: &LocalPermutation) -> f64 {
        mc::bernoulli_se(self.prob(perm), self.trials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perm(period: f64, guard: usize) -> PermChannel {
        PermChannel::new(
            FptModel::new(0.25, 1.0, 1.0).unwrap(),
            Schedule::synchronous(period).unwrap(),
            guard,
        )
        .unwrap()
    }

    #[test]
    fn local_version_of_direct_sort() {
        let a = ArrivalSequence::new(vec![2.0, 1.0, 3.0]).unwrap();
        let p = order_to_local_permutation(&a, &[1, 2, 3]).unwrap();
        assert_eq!(p.ranks(), &[2, 1, 3]);
        let single = order_to_local_permutation(&a, &[3]).unwrap();
        assert_eq!(single.ranks(), &[1]);
        assert!(order_to_local_permutation(&a, &[]).is_err());
        assert!(order_to_local_permutation(&a, &[4]).is_err());
    }

    #[test]
    fn worked_local_version() {
        // Bottom row (5, 4, 3, 1, 2) restricted to {1, 3, 5}.
        let a = ArrivalSequence::new(vec![5.0, 4.0, 3.0, 1.0, 2.0]).unwrap();
        let p = order_to_local_permutation(&a, &[1, 3, 5]).unwrap();
        assert_eq!(p.indices(), &[1, 3, 5]);
        assert_eq!(p.ranks(), &[3, 2, 1]);
    }

    #[test]
    fn ties_go_to_earlier_index() {
        let a = ArrivalSequence::new(vec![1.0, 1.0, 0.5]).unwrap();
        let p = order_to_local_permutation(&a, &[1, 2, 3]).unwrap();
        assert_eq!(p.ranks(), &[2, 3, 1]);
    }

    #[test]
    fn apply_basics() {
        let id = LocalPermutation::identity(vec![0, 1, 2]).unwrap();
        assert_eq!(apply_permutation(&['a', 'b', 'c'], &id).unwrap(), vec!['a', 'b', 'c']);
        let swap = LocalPermutation::new(vec![0, 1], vec![2, 1]).unwrap();
        assert_eq!(apply_permutation(&['a', 'b'], &swap).unwrap(), vec!['b', 'a']);
        assert!(apply_permutation(&['a'], &swap).is_err());
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(LocalPermutation::new(vec![0, 1], vec![1, 1]).is_err());
        assert!(LocalPermutation::new(vec![1, 0], vec![1, 2]).is_err());
        assert!(LocalPermutation::new(vec![0, 1], vec![0, 1]).is_err());
    }

    #[test]
    fn huge_period_is_identity() {
        let ch = perm(1e6, 3);
        let w = Window::new(0, 4, 2).unwrap();
        let x = Tape::new(-2, vec![1, 0, 1, 1, 0, 0, 1, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (out, local, outlier) = ch.sample_output(&x, &w, &mut rng).unwrap();
            assert_eq!(out, vec![1, 1, 0, 0]);
            assert!(local.is_identity());
            assert!(!outlier);
        }
        let g = ch.estimate_gamma(&x, &w, 2000, &mut rng).unwrap();
        assert_eq!(g.support.len(), 1);
        assert!(g.support.keys().next().unwrap().is_identity());
        assert_eq!(g.outlier_mass, 0.0);
        assert!(g.low_confidence);
    }

    #[test]
    fn requires_extended_coverage() {
        let ch = perm(1.0, 0);
        let w = Window::new(0, 2, 1).unwrap();
        let x = Tape::new(0, vec![0, 1, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ch.sample_output(&x, &w, &mut rng).is_err());
    }

    #[test]
    fn unit_window_is_point_mass() {
        let ch = perm(1.0, 0);
        let w = Window::new(5, 1, 0).unwrap();
        let x = Tape::new(5, vec![1]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = ch.estimate_gamma(&x, &w, 500, &mut rng).unwrap();
        assert_eq!(g.support.len(), 1);
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_matrix_guards() {
        let ch = perm(1.0, 0);
        let w = Window::new(0, 7, 0).unwrap();
        let x = Tape::constant(0..7, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            ch.block_matrix(&x, &w, 2, 10, &mut rng),
            Err(Error::Guard { guard: "window length", .. })
        ));
    }

    #[test]
    fn constant_block_is_fixed_point() {
        let ch = perm(0.5, 2);
        let w = Window::new(0, 3, 1).unwrap();
        let ctx = Tape::constant(-3..6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ch.block_matrix(&ctx, &w, 2, 4000, &mut rng).unwrap();
        let row = m.row(&[1, 1, 1]).unwrap();
        assert_eq!(row[7], 1.0);
    }
}
