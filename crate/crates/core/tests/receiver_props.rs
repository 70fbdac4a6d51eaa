use std::sync::Arc;

use molchan::block::Tape;
use molchan::infotheory::adima_scan;
use molchan::receiver::{
    cascade, dmc_block, BlockChannel, DmcSpec, FiniteMemory, FiniteMemoryKernel, Memoryless, SequenceCascade,
    SequenceChannel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stochastic(rows: usize, cols: usize, raw: &[f64]) -> Vec<f64> {
    raw.chunks(cols)
        .take(rows)
        .flat_map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(move |v| v / s).collect::<Vec<_>>()
        })
        .collect()
}

fn dense(a: usize, b: usize, n: usize, raw: &[f64]) -> BlockChannel {
    let (rows, cols) = (a.pow(n as u32), b.pow(n as u32));
    BlockChannel::dense(a, b, n, stochastic(rows, cols, raw)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cascade_is_associative(
        ra in prop::collection::vec(0.01f64..1.0, 36),
        rb in prop::collection::vec(0.01f64..1.0, 36),
        rc in prop::collection::vec(0.01f64..1.0, 16),
    ) {
        // 2 -> 3 -> 2 -> 2 symbols on blocks of length 2.
        let a = dense(2, 3, 2, &ra);
        let b = dense(3, 2, 2, &rb);
        let c = dense(2, 2, 2, &rc);
        let left = cascade(&cascade(&a, &b).unwrap(), &c).unwrap().matrix().unwrap();
        let right = cascade(&a, &cascade(&b, &c).unwrap()).unwrap().matrix().unwrap();
        for (x, y) in left.iter().zip(&right) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        for row in left.chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn memoryless_cascade_composes_letters(p in 0.0f64..0.5, q in 0.0f64..0.5) {
        let ab = cascade(&dmc_block(&DmcSpec::bsc(p).unwrap(), 2).unwrap(), &dmc_block(&DmcSpec::bsc(q).unwrap(), 2).unwrap())
            .unwrap()
            .matrix()
            .unwrap();
        let direct = dmc_block(&DmcSpec::bsc(p * (1.0 - q) + q * (1.0 - p)).unwrap(), 2).unwrap().matrix().unwrap();
        for (x, y) in ab.iter().zip(&direct) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

fn finite_memory_cascade() -> SequenceCascade {
    let first = FiniteMemory(FiniteMemoryKernel::binary_isi(1, &[0.05, 0.3]).unwrap());
    let second = FiniteMemory(FiniteMemoryKernel::binary_isi(2, &[0.1, 0.2, 0.45]).unwrap());
    SequenceCascade::new(Arc::new(first), Arc::new(second)).unwrap()
}

#[test]
fn cascade_of_windows_adds_memories() {
    let chain = finite_memory_cascade();
    assert_eq!(chain.context().0, 3);
    let m: Vec<usize> = (0..=5).collect();
    let points = adima_scan(&chain, 3, &m, 20, 0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    for p in &points {
        assert!(p.exact);
        assert_eq!(p.gap == 0.0, p.m >= 3, "m = {}: {}", p.m, p.gap);
    }
}

/// The exact window law of a cascade of stationary components does not
/// move when input and window shift together.
#[test]
fn cascade_is_shift_stationary() {
    let chain = finite_memory_cascade();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let k: i64 = rng.random_range(-4..5);
        let symbols: Vec<u8> = (0..20).map(|_| rng.random_range(0..2)).collect();
        let x = Tape::new(k - 8, symbols);
        let tx = x.shift_left();
        let a = chain.window_law(&x, k..k + 4).unwrap().unwrap();
        let b = chain.window_law(&tx, k - 1..k + 3).unwrap().unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn memoryless_sequence_matches_block() {
    let ch = Memoryless(DmcSpec::bsc(0.2).unwrap());
    let x = Tape::new(0, vec![1, 0, 1]);
    let law = ch.window_law(&x, 0..3).unwrap().unwrap();
    let block = dmc_block(&DmcSpec::bsc(0.2).unwrap(), 3).unwrap().row(&[1, 0, 1]).unwrap();
    for (p, q) in law.iter().zip(&block) {
        assert!((p - q).abs() <= 1e-12);
    }
}
