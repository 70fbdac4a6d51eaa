//! Bernoulli(0.3) against Bernoulli(0.5) product measures: variational
//! distance climbs towards 1 while d̄ stays at the letter distance.

use molchan::infotheory::{dbar_empirical, dbar_exact, variational_distance, FiniteDistribution};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn variational_grows_dbar_stays() {
    let mut last = f64::NEG_INFINITY;
    for n in [1, 2, 4, 8, 12] {
        let p = FiniteDistribution::bernoulli(0.3, n).unwrap();
        let q = FiniteDistribution::bernoulli(0.5, n).unwrap();
        let v = variational_distance(&p, &q).unwrap();
        assert!(v > last, "n = {n}: {v} <= {last}");
        last = v;
        if n <= 8 {
            let d = dbar_exact(&p, &q).unwrap().0;
            assert!((d - 0.2).abs() <= 1e-6, "n = {n}: {d}");
        }
    }
    let v1 = variational_distance(&FiniteDistribution::bernoulli(0.3, 1).unwrap(), &FiniteDistribution::bernoulli(0.5, 1).unwrap()).unwrap();
    assert!((v1 - 0.2).abs() < 1e-12);
}

#[test]
fn empirical_dbar_at_twelve() {
    let bern = |p: f64| move |r: &mut dyn RngCore| (0..12).map(|_| u8::from(r.random::<f64>() < p)).collect::<Vec<_>>();
    let est = dbar_empirical(bern(0.3), bern(0.5), 2, 12, 4000, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    assert!((est.value - 0.2).abs() <= 3.0 * est.se, "{est:?}");
}
