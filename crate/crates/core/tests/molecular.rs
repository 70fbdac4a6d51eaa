use std::collections::HashMap;

use molchan::block::{block_at, block_index, Tape};
use molchan::fpt::{FptModel, Schedule};
use molchan::permchan::{PermChannel, Window};
use molchan::receiver::{dmc_block, molecular_channel, DmcSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn perm(period: f64) -> PermChannel {
    PermChannel::new(FptModel::new(0.25, 1.0, 1.0).unwrap(), Schedule::synchronous(period).unwrap(), 10).unwrap()
}

#[test]
fn slow_releases_leave_only_the_receiver() {
    let rx = dmc_block(&DmcSpec::bsc(0.05).unwrap(), 3).unwrap();
    let ctx = Tape::constant(-4..7, 0);
    let ch = molecular_channel(&perm(1e6), 4, &rx, &ctx, 2000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for (a, b) in ch.matrix().unwrap().iter().zip(&rx.matrix().unwrap()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

/// Rows of the estimated permutation matrix against output frequencies
/// counted straight from simulated arrival orders.
#[test]
fn block_matrix_matches_direct_simulation() {
    let ch = perm(1.0);
    let w = Window::new(0, 3, 4).unwrap();
    let trials = 200_000;
    let matrix = ch
        .block_matrix(&Tape::constant(-4..7, 0), &w, 2, trials, &mut ChaCha8Rng::seed_from_u64(2))
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for u in 0..8 {
        let block = block_at(u, 2, 3);
        let mut tape = Tape::constant(-4..7, 0);
        tape.write(0, &block).unwrap();
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for _ in 0..trials {
            let (y, _, _) = ch.sample_output(&tape, &w, &mut rng).unwrap();
            *counts.entry(block_index(&y, 2)).or_default() += 1;
        }
        let row = matrix.row(&block).unwrap();
        for (y, &p) in row.iter().enumerate() {
            let q = counts.get(&y).copied().unwrap_or(0) as f64 / trials as f64;
            let se = ((p * (1.0 - p) + q * (1.0 - q)) / trials as f64).sqrt();
            assert!((p - q).abs() <= 3.0 * se + 1.0 / trials as f64, "u = {u}, y = {y}: {p} vs {q}");
        }
    }
}
