//! Window-sensitivity, d̄-continuity and mixing scans over sequence
//! channels.

use std::ops::Range;

use rand::{Rng, RngCore};
use serde::Serialize;

use super::{dbar_empirical, dbar_exact, variational_distance, Event, FiniteDistribution};
use crate::block::{block_index, guarded_block_count, Tape};
use crate::mc;
use crate::receiver::{SequenceChannel, MAX_LAW_BLOCKS};
use crate::{Error, Result, Symbol};

/// Fewest input pairs an ADIMA scan may use.
pub const MIN_ADIMA_PAIRS: usize = 20;
const MAX_CYLINDER: usize = 3;

fn complement(a: Symbol, q: usize) -> Symbol {
    ((a as usize + 1) % q) as Symbol
}

/// `count` input pairs on `span` that agree on `keep` and differ at every
/// other position.
///
/// Pair `j` is a function of `(seed, j)` only, so the pairs for two
/// agreement windows differ exactly on the positions between them.
pub fn adversarial_pairs(
    q: usize,
    span: Range<i64>,
    keep: Range<i64>,
    count: usize,
    seed: u64,
) -> Vec<(Tape, Tape)> {
    let len = (span.end - span.start).max(0) as usize;
    (0..count)
        .map(|j| {
            let mut rng = mc::stream_rng(seed, j as u64);
            let x: Vec<Symbol> = match j {
                0 => vec![0; len],
                1 => vec![(q - 1) as Symbol; len],
                _ => (0..len).map(|_| rng.random_range(0..q) as Symbol).collect(),
            };
            let y = x
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    if keep.contains(&(span.start + i as i64)) {
                        a
                    } else {
                        complement(a, q)
                    }
                })
                .collect();
            (Tape::new(span.start, x), Tape::new(span.start, y))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdimaPoint {
    pub m: usize,
    /// Largest variational distance over the pairs.
    pub gap: f64,
    pub se: f64,
    pub exact: bool,
}

fn window_len(w: &Range<i64>) -> usize {
    (w.end - w.start) as usize
}

fn empirical_law(
    channel: &dyn SequenceChannel,
    tape: &Tape,
    window: &Range<i64>,
    base: u64,
    trials: usize,
) -> Result<Vec<usize>> {
    let q = channel.output_alphabet();
    let draws = mc::map_trials(base, trials, |_, rng| {
        channel
            .sample_window(tape, window.clone(), rng)
            .map(|y| block_index(&y, q))
    });
    draws.into_iter().collect()
}

/// Variational distance between the empirical output laws of two inputs
/// drawn with common random numbers, with a paired standard error for the
/// event on which the first law dominates.
fn sampled_gap(
    channel: &dyn SequenceChannel,
    x: &Tape,
    y: &Tape,
    window: &Range<i64>,
    base: u64,
    trials: usize,
) -> Result<(f64, f64)> {
    let size = guarded_block_count(channel.output_alphabet(), window_len(window), "output law", MAX_LAW_BLOCKS)?;
    let a = empirical_law(channel, x, window, base, trials)?;
    let b = empirical_law(channel, y, window, base, trials)?;
    let mut diff = vec![0i64; size];
    for (&i, &j) in a.iter().zip(&b) {
        diff[i] += 1;
        diff[j] -= 1;
    }
    let gap = diff.iter().filter(|&&d| d > 0).sum::<i64>() as f64 / trials as f64;
    let d: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(&i, &j)| (diff[i] > 0) as i32 as f64 - (diff[j] > 0) as i32 as f64)
        .collect();
    let mean = d.iter().sum::<f64>() / trials as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials.max(2) - 1) as f64;
    Ok((gap, (var / trials as f64).sqrt()))
}

/// For each `m`, the largest variational distance between the output laws
/// on `[0, n)` of input pairs that agree on `[-m, n + m)` and differ
/// everywhere else the channel can see.
///
/// Channels with an exact window law are compared exactly; others by
/// `trials` coupled draws per input.
pub fn adima_scan<R: Rng + ?Sized>(
    channel: &dyn SequenceChannel,
    n: usize,
    m_values: &[usize],
    pairs: usize,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<AdimaPoint>> {
    if pairs < MIN_ADIMA_PAIRS {
        return Err(Error::pre(format!("need at least {MIN_ADIMA_PAIRS} input pairs, got {pairs}")));
    }
    if n == 0 {
        return Err(Error::pre("empty window"));
    }
    let widest = m_values.iter().copied().max().unwrap_or(0) as i64;
    let (before, after) = channel.context();
    let span = -(widest.max(before as i64))..n as i64 + widest.max(after as i64);
    let window = 0..n as i64;
    let q_out = channel.output_alphabet();
    let pair_seed = mc::derive_seed(rng);
    let base = mc::derive_seed(rng);
    let exact = channel.window_law(&Tape::constant(span.clone(), 0), window.clone()).is_some();
    m_values
        .iter()
        .map(|&m| {
            let keep = -(m as i64)..n as i64 + m as i64;
            let mut best = (0.0f64, 0.0f64);
            for (x, y) in adversarial_pairs(channel.input_alphabet(), span.clone(), keep, pairs, pair_seed) {
                let (gap, se) = if exact {
                    let lx = channel.window_law(&x, window.clone()).expect("law available")?;
                    let ly = channel.window_law(&y, window.clone()).expect("law available")?;
                    let px = FiniteDistribution::new(q_out, n, lx)?;
                    let py = FiniteDistribution::new(q_out, n, ly)?;
                    (variational_distance(&px, &py)?, 0.0)
                } else {
                    sampled_gap(channel, &x, &y, &window, base, trials)?
                };
                if gap > best.0 {
                    best = (gap, se);
                }
            }
            Ok(AdimaPoint {
                m,
                gap: best.0,
                se: best.1,
                exact,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityPoint {
    pub n: usize,
    /// Largest d̄ over the pairs.
    pub dbar: f64,
    pub se: f64,
    pub exact: bool,
}

/// For each `n`, the largest d̄ between the output laws on `[0, n)` of
/// input pairs that agree on `[0, n)` and differ outside it.
///
/// Uses exact laws when the channel has them and the coupling table fits,
/// otherwise the empirical estimator with `trials` draws per input.
pub fn dbar_continuity_scan<R: Rng + ?Sized>(
    channel: &dyn SequenceChannel,
    n_values: &[usize],
    pairs: usize,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<ContinuityPoint>> {
    if pairs == 0 {
        return Err(Error::pre("need at least one input pair"));
    }
    let (before, after) = channel.context();
    let q_out = channel.output_alphabet();
    let pair_seed = mc::derive_seed(rng);
    n_values
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::pre("empty window"));
            }
            let window = 0..n as i64;
            let span = -(before.max(1) as i64)..n as i64 + after.max(1) as i64;
            let exact = channel.window_law(&Tape::constant(span.clone(), 0), window.clone()).is_some()
                && guarded_block_count(q_out, n, "output law", 1000).is_ok();
            let mut best = (0.0f64, 0.0f64);
            for (x, y) in adversarial_pairs(channel.input_alphabet(), span, window.clone(), pairs, pair_seed) {
                let (d, se) = if exact {
                    let px = FiniteDistribution::new(q_out, n, channel.window_law(&x, window.clone()).expect("law")?)?;
                    let py = FiniteDistribution::new(q_out, n, channel.window_law(&y, window.clone()).expect("law")?)?;
                    (dbar_exact(&px, &py)?.0, 0.0)
                } else {
                    let est = dbar_empirical(
                        |r: &mut dyn RngCore| channel.sample_window(&x, window.clone(), r).expect("tape covers window"),
                        |r: &mut dyn RngCore| channel.sample_window(&y, window.clone(), r).expect("tape covers window"),
                        q_out,
                        n,
                        trials,
                        rng,
                    )?;
                    (est.value, est.se)
                };
                if d > best.0 {
                    best = (d, se);
                }
            }
            Ok(ContinuityPoint {
                n,
                dbar: best.0,
                se: best.1,
                exact,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingPoint {
    pub k: usize,
    /// `|P(T^-k F1 ∩ F2) − P(T^-k F1) P(F2)|`.
    pub gap: f64,
    pub se: f64,
    pub exact: bool,
}

/// The two cylinder events of a mixing scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingSpec {
    pub first: Event,
    pub second: Event,
}

fn event_prob(law: &[f64], q: usize, lo: i64, len: usize, event: &Event, k: i64) -> f64 {
    let mut y = vec![0; len];
    law.iter()
        .enumerate()
        .filter(|(idx, _)| {
            crate::block::fill_block(*idx, q, &mut y);
            event.contains(&y, lo, k)
        })
        .map(|(_, p)| p)
        .sum()
}

fn separated(a: &Range<i64>, b: &Range<i64>, d: usize) -> bool {
    let dist = if a.end <= b.start {
        b.start - a.end + 1
    } else if b.end <= a.start {
        a.start - b.end + 1
    } else {
        0
    };
    dist > d as i64
}

/// Mixing gap of the output process for input `x`, with `F1` shifted `k`
/// places later.
///
/// Gaps are exact when an event is trivial, when the channel declares the
/// two spans independent, or when the channel has an exact law on the
/// window spanning both; otherwise `trials` draws (shared across `k`) are
/// used and the standard error comes from the delta method.
pub fn strong_mixing_scan<R: Rng + ?Sized>(
    channel: &dyn SequenceChannel,
    x: &Tape,
    spec: &MixingSpec,
    k_values: &[usize],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<MixingPoint>> {
    for e in [&spec.first, &spec.second] {
        if let Event::Cylinder { symbols, .. } = e {
            if symbols.len() > MAX_CYLINDER {
                return Err(Error::Guard {
                    guard: "cylinder length",
                    limit: MAX_CYLINDER,
                    actual: symbols.len(),
                });
            }
        }
    }
    let base = mc::derive_seed(rng);
    let q = channel.output_alphabet();
    k_values
        .iter()
        .map(|&k| {
            let exact_zero = |exact| MixingPoint {
                k,
                gap: 0.0,
                se: 0.0,
                exact,
            };
            let (Some(a), Some(b)) = (spec.first.span(k as i64), spec.second.span(0)) else {
                return Ok(exact_zero(true));
            };
            if channel.independence_range().is_some_and(|d| separated(&a, &b, d)) {
                return Ok(exact_zero(true));
            }
            let window = a.start.min(b.start)..a.end.max(b.end);
            let len = window_len(&window);
            if guarded_block_count(q, len, "output law", MAX_LAW_BLOCKS).is_ok() {
                if let Some(law) = channel.window_law(x, window.clone()) {
                    let law = law?;
                    let lo = window.start;
                    let pa = event_prob(&law, q, lo, len, &spec.first, k as i64);
                    let pb = event_prob(&law, q, lo, len, &spec.second, 0);
                    let mut y = vec![0; len];
                    let pab: f64 = law
                        .iter()
                        .enumerate()
                        .filter(|(idx, _)| {
                            crate::block::fill_block(*idx, q, &mut y);
                            spec.first.contains(&y, lo, k as i64) && spec.second.contains(&y, lo, 0)
                        })
                        .map(|(_, p)| p)
                        .sum();
                    return Ok(MixingPoint {
                        k,
                        gap: (pab - pa * pb).abs(),
                        se: 0.0,
                        exact: true,
                    });
                }
            }
            let hits = mc::map_trials(base, trials, |_, rng| {
                channel.sample_window(x, window.clone(), rng).map(|y| {
                    (
                        spec.first.contains(&y, window.start, k as i64),
                        spec.second.contains(&y, window.start, 0),
                    )
                })
            });
            let hits: Vec<(bool, bool)> = hits.into_iter().collect::<Result<_>>()?;
            let nf = trials as f64;
            let pa = hits.iter().filter(|h| h.0).count() as f64 / nf;
            let pb = hits.iter().filter(|h| h.1).count() as f64 / nf;
            let pab = hits.iter().filter(|h| h.0 && h.1).count() as f64 / nf;
            let gap = pab - pa * pb;
            // Influence function of pab − pa·pb.
            let psi: Vec<f64> = hits
                .iter()
                .map(|&(ia, ib)| {
                    let (ia, ib) = (ia as i32 as f64, ib as i32 as f64);
                    ia * ib - pb * ia - pa * ib
                })
                .collect();
            let mean = psi.iter().sum::<f64>() / nf;
            let var = psi.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
            Ok(MixingPoint {
                k,
                gap: gap.abs(),
                se: (var / nf).sqrt(),
                exact: false,
            })
        })
        .collect()
}
