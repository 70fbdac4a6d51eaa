use microlp::{ComparisonOp, OptimizationDirection, Problem};
use molchan::block::block_at;
use molchan::infotheory::{dbar_empirical, dbar_exact, hamming_cost, FiniteDistribution};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// d̄ as a plain linear program over couplings.
fn dbar_lp(p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
    let (a, n) = (p.alphabet(), p.n());
    let size = p.probs().len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| lp.add_var(hamming_cost(&block_at(i, a, n), &block_at(j, a, n)).unwrap(), (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    for i in 0..size {
        lp.add_constraint(vars[i].iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, p.probs()[i]);
        lp.add_constraint(vars.iter().map(|row| (row[i], 1.0)), ComparisonOp::Eq, q.probs()[i]);
    }
    lp.solve().unwrap().objective()
}

fn law(a: usize, n: usize, weights: &[f64]) -> FiniteDistribution {
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let drift = 1.0 - probs.iter().sum::<f64>();
    let top = (0..probs.len()).max_by(|&i, &j| probs[i].total_cmp(&probs[j])).unwrap();
    probs[top] += drift;
    FiniteDistribution::new(a, n, probs).unwrap()
}

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], len)
        .prop_filter("some mass", |w| w.iter().sum::<f64>() > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn transport_matches_linear_program(wp in weights(9), wq in weights(9)) {
        let (p, q) = (law(3, 2, &wp), law(3, 2, &wq));
        let (value, coupling) = dbar_exact(&p, &q).unwrap();
        prop_assert!((value - dbar_lp(&p, &q)).abs() <= 1e-9);
        prop_assert!(coupling.marginal_error(&p, &q) <= 1e-9);
        prop_assert!((coupling.expected_hamming() - value).abs() <= 1e-9);
    }

    #[test]
    fn metric_axioms(wa in weights(8), wb in weights(8), wc in weights(8)) {
        let (a, b, c) = (law(2, 3, &wa), law(2, 3, &wb), law(2, 3, &wc));
        let ab = dbar_exact(&a, &b).unwrap().0;
        prop_assert!((ab - dbar_exact(&b, &a).unwrap().0).abs() <= 1e-9);
        prop_assert!(dbar_exact(&a, &a).unwrap().0.abs() <= 1e-12);
        let ac = dbar_exact(&a, &c).unwrap().0;
        let bc = dbar_exact(&b, &c).unwrap().0;
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
    }
}

#[test]
fn exact_never_exceeds_empirical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..6 {
        let wp: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let wq: Vec<f64> = (0..16).map(|_| rng.random::<f64>().powi(case + 1)).collect();
        let (p, q) = (law(2, 4, &wp), law(2, 4, &wq));
        let exact = dbar_exact(&p, &q).unwrap().0;
        let (ps, qs) = (p.clone(), q.clone());
        let est = dbar_empirical(
            move |r: &mut dyn RngCore| ps.sample(r),
            move |r: &mut dyn RngCore| qs.sample(r),
            2,
            4,
            2000,
            &mut rng,
        )
        .unwrap();
        assert!(exact <= est.value + 3.0 * est.se, "case {case}: {exact} > {} + 3 × {}", est.value, est.se);
    }
}
