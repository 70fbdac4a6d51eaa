//! Reproducible Monte-Carlo fan-out.
//!
//! Trials are grouped into fixed-size batches. Batch `b` draws from the
//! ChaCha stream `b` of a base seed, so every trial sees the same random
//! numbers no matter how many threads execute the batches, and partial
//! results are merged in batch order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Trials per batch.
pub const BATCH: usize = 1024;

/// Generator for stream `stream` of `base`.
pub fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng
}

/// Draws a base seed for a fan-out from a caller-supplied generator.
pub fn derive_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

/// Folds `trials` trials into an accumulator.
///
/// `step(acc, trial_index, rng)` runs once per trial; `merge` combines
/// batch accumulators left to right.
pub fn fold_trials<T, I, S, M>(base: u64, trials: usize, init: I, step: S, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync,
    S: Fn(&mut T, usize, &mut ChaCha8Rng) + Sync,
    M: Fn(T, T) -> T,
{
    let batches = trials.div_ceil(BATCH);
    let partial: Vec<T> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(base, b as u64);
            let mut acc = init();
            let lo = b * BATCH;
            let hi = (lo + BATCH).min(trials);
            for t in lo..hi {
                step(&mut acc, t, &mut rng);
            }
            acc
        })
        .collect();
    partial.into_iter().fold(init(), merge)
}

/// Runs `trials` trials and returns their outputs in trial order.
pub fn map_trials<T, F>(base: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    let batches = trials.div_ceil(BATCH);
    let nested: Vec<Vec<T>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(base, b as u64);
            let lo = b * BATCH;
            let hi = (lo + BATCH).min(trials);
            (lo..hi).map(|t| f(t, &mut rng)).collect()
        })
        .collect();
    nested.into_iter().flatten().collect()
}

/// Counts trials for which `hit` returns true.
pub fn count_hits<F>(base: u64, trials: usize, hit: F) -> usize
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    fold_trials(
        base,
        trials,
        || 0usize,
        |acc, _, rng| {
            if hit(rng) {
                *acc += 1;
            }
        },
        |a, b| a + b,
    )
}

/// Standard error of a Bernoulli frequency estimate.
pub fn bernoulli_se(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_uniforms(threads: usize) -> f64 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            fold_trials(
                7,
                5000,
                || 0.0f64,
                |acc, _, rng| *acc += rng.random::<f64>(),
                |a, b| a + b,
            )
        })
    }

    #[test]
    fn independent_of_worker_count() {
        let one = sum_uniforms(1);
        let four = sum_uniforms(4);
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let out = map_trials(3, 3000, |t, _| t);
        assert_eq!(out, (0..3000).collect::<Vec<_>>());
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, 0).random();
        let b: u64 = stream_rng(1, 1).random();
        assert_ne!(a, b);
    }
}
