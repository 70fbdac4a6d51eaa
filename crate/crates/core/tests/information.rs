use molchan::block::block_at;
use molchan::infotheory::{
    entropy, mean_information_density, mutual_information_exact, quantile_capacity, sample_information_density,
    sample_mutual_information, FiniteDistribution,
};
use molchan::receiver::{cascade, dmc_block, BlockChannel, DmcSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn normalized(raw: &[f64], cols: usize) -> Vec<f64> {
    raw.chunks(cols)
        .flat_map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(move |v| v / s).collect::<Vec<_>>()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn density_averages_to_mutual_information(
        raw in prop::collection::vec(0.01f64..1.0, 36),
        src in prop::collection::vec(0.01f64..1.0, 4),
    ) {
        // Binary inputs, ternary outputs, blocks of length 2.
        let ch = BlockChannel::dense(2, 3, 2, normalized(&raw, 9)).unwrap();
        let source = FiniteDistribution::new(2, 2, normalized(&src, 4)).unwrap();
        let mi = mutual_information_exact(&source, &ch).unwrap();
        prop_assert!((mean_information_density(&source, &ch).unwrap() - mi).abs() <= 1e-9);

        let mut by_hand = 0.0;
        for xi in 0..4 {
            let x = block_at(xi, 2, 2);
            for yi in 0..9 {
                let y = block_at(yi, 3, 2);
                let joint = source.prob(&x) * ch.likelihood(&x, &y).unwrap();
                if joint > 0.0 {
                    by_hand += joint * sample_mutual_information(&x, &y, &source, &ch).unwrap();
                }
            }
        }
        prop_assert!((by_hand - mi).abs() <= 1e-9);
        prop_assert!(mi >= -1e-12);
    }

    #[test]
    fn processing_never_adds_information(p in 0.0f64..0.5, q in 0.0f64..0.5, a in 0.05f64..0.95) {
        let source = FiniteDistribution::bernoulli(a, 3).unwrap();
        let first = dmc_block(&DmcSpec::bsc(p).unwrap(), 3).unwrap();
        let both = cascade(&first, &dmc_block(&DmcSpec::bsc(q).unwrap(), 3).unwrap()).unwrap();
        prop_assert!(
            mutual_information_exact(&source, &both).unwrap() <= mutual_information_exact(&source, &first).unwrap() + 1e-12
        );
    }
}

#[test]
fn identity_quantile_capacity_is_source_entropy() {
    for q in [2, 3, 4] {
        let source = FiniteDistribution::uniform(q, 3).unwrap();
        let ch = dmc_block(&DmcSpec::identity(q).unwrap(), 3).unwrap();
        let draws = sample_information_density(&source, &ch, 500, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let h = entropy(&FiniteDistribution::uniform(q, 1).unwrap());
        for lambda in [0.1, 0.05, 0.01] {
            assert!((quantile_capacity(&draws.values, lambda).unwrap() - h).abs() <= 1e-12);
        }
        assert!((h - (q as f64).log2()).abs() <= 1e-12);
    }
}
