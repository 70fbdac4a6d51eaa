use molchan::block::Tape;
use molchan::fpt::{FptModel, Schedule};
use molchan::permchan::{PermChannel, Window};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn channel(period: f64) -> PermChannel {
    PermChannel::new(FptModel::new(0.25, 1.0, 1.0).unwrap(), Schedule::synchronous(period).unwrap(), 10).unwrap()
}

fn random_tape(range: std::ops::Range<i64>, rng: &mut impl Rng) -> Tape {
    let symbols = range.clone().map(|_| rng.random_range(0..2u8)).collect();
    Tape::new(range.start, symbols)
}

/// Shifting the input one step left and the window one step left leaves
/// the block law unchanged.
#[test]
fn block_law_is_shift_stationary() {
    let ch = channel(1.0);
    let trials = 100_000;
    let mut pick = ChaCha8Rng::seed_from_u64(21);
    for case in 0..5 {
        let k: i64 = pick.random_range(-3..4);
        let w = Window::new(k, 3, 3).unwrap();
        let x = random_tape(k - 6..k + 10, &mut pick);
        let tx = x.shift_left();
        let a = ch.block_matrix(&x, &w, 2, trials, &mut ChaCha8Rng::seed_from_u64(100 + case)).unwrap();
        let b = ch
            .block_matrix(&tx, &w.shifted(-1), 2, trials, &mut ChaCha8Rng::seed_from_u64(200 + case))
            .unwrap();
        let u = x.slice(w.range()).unwrap();
        assert_eq!(u, tx.slice(w.shifted(-1).range()).unwrap());
        let (ra, rb) = (a.row(u).unwrap(), b.row(u).unwrap());
        for (p, q) in ra.iter().zip(&rb) {
            let se = ((p * (1.0 - p) + q * (1.0 - q)) / trials as f64).sqrt();
            assert!((p - q).abs() <= 3.0 * se + 1.0 / trials as f64, "case {case}: {p} vs {q}");
        }
        // Shared generator streams couple the two runs exactly.
        let c = ch.block_matrix(&tx, &w.shifted(-1), 2, trials, &mut ChaCha8Rng::seed_from_u64(100 + case)).unwrap();
        assert_eq!(a.matrix().unwrap(), c.matrix().unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outputs_keep_the_window_multiset_without_outliers(
        seed in any::<u64>(),
        start in -5i64..5,
        len in 1usize..8,
        margin in 0usize..4,
        period in 0.2f64..2.0,
    ) {
        let ch = channel(period);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Window::new(start, len, margin).unwrap();
        let ext = w.extended();
        let x = random_tape(ext.start - 2..ext.end + 2, &mut rng);
        let (y, perm, outlier) = ch.sample_output(&x, &w, &mut rng).unwrap();
        prop_assert_eq!(y.len(), len);
        prop_assert_eq!(perm.len(), (ext.end - ext.start) as usize);
        if !outlier && margin == 0 {
            let mut a = y.clone();
            let mut b = x.slice(w.range()).unwrap().to_vec();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
        if !outlier {
            let ones_in = x.slice(ext.clone()).unwrap().iter().filter(|&&s| s == 1).count();
            let ones_out = y.iter().filter(|&&s| s == 1).count();
            prop_assert!(ones_out <= ones_in);
        }
    }

    #[test]
    fn gamma_is_a_distribution(seed in any::<u64>(), period in 0.3f64..3.0, margin in 0usize..3) {
        let ch = channel(period);
        let w = Window::new(0, 3, margin).unwrap();
        let x = Tape::constant(-6..10, 0);
        let g = ch.estimate_gamma(&x, &w, 2000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let total: f64 = g.support.values().sum::<f64>() + g.outlier_mass;
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(g.support.values().all(|&p| p >= 0.0));
    }
}
