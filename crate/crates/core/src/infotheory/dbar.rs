//! The d̄ distance: exact via transportation, empirical via flow on the
//! Hamming graph.

use rand::{Rng, RngCore};
use serde::Serialize;

use super::{hamming_count, Coupling, FiniteDistribution};
use crate::block::{block_index, fill_block, guarded_block_count};
use crate::mc;
use crate::receiver::MAX_LAW_BLOCKS;
use crate::transport::{transport, FlowNetwork};
use crate::{Error, Result, Symbol};

/// Largest coupling table `dbar_exact` will build.
pub const MAX_COUPLING_CELLS: usize = 1_000_000;

const BOOTSTRAP_REPLICATES: usize = 64;
const MIN_EMPIRICAL_TRIALS: usize = 1000;

/// Normalized Hamming distance between equal-length blocks.
pub fn hamming_cost(u: &[Symbol], w: &[Symbol]) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            actual: w.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::pre("empty blocks"));
    }
    Ok(hamming_count(u, w) as f64 / u.len() as f64)
}

/// `d̄_n(P, Q)`: the least expected normalized Hamming distance over
/// couplings of `P` and `Q`, with an optimal coupling.
pub fn dbar_exact(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<(f64, Coupling)> {
    p.same_space(q)?;
    let size = p.probs.len();
    if size.saturating_mul(size) > MAX_COUPLING_CELLS {
        return Err(Error::Guard {
            guard: "coupling cells",
            limit: MAX_COUPLING_CELLS,
            actual: size.saturating_mul(size),
        });
    }
    let (alpha, n) = (p.q, p.n);
    let blocks: Vec<Vec<Symbol>> = (0..size).map(|k| crate::block::block_at(k, alpha, n)).collect();
    let plan = transport(&p.probs, &q.probs, |i, j| hamming_count(&blocks[i], &blocks[j]) as i64)
        .map_err(|e| Error::Numerical(format!("transport solver failed: {e}")))?;
    let value = (plan.cost / n as f64).clamp(0.0, 1.0);
    Ok((
        value,
        Coupling {
            q: alpha,
            n,
            table: plan.plan,
        },
    ))
}

/// Least total Hamming distance of a perfect matching between two equal
/// multisets of blocks, given their counts per block index.
fn matching_cost(alpha: usize, n: usize, left: &[f64], right: &[f64]) -> Result<f64> {
    let size = left.len();
    let (s, t) = (size, size + 1);
    let mut net = FlowNetwork::new(size + 2);
    let mut b = vec![0; n];
    for k in 0..size {
        fill_block(k, alpha, &mut b);
        for pos in 0..n {
            let orig = b[pos];
            for a in 0..alpha as Symbol {
                if a != orig {
                    b[pos] = a;
                    net.add_arc(k, block_index(&b, alpha), f64::INFINITY, 1)?;
                }
            }
            b[pos] = orig;
        }
        let excess = left[k] - right[k];
        if excess > 0.0 {
            net.add_arc(s, k, excess, 0)?;
        } else if excess < 0.0 {
            net.add_arc(k, t, -excess, 0)?;
        }
    }
    Ok(net.min_cost_max_flow(s, t, 0.5)?.cost)
}

fn counts(alpha: usize, size: usize, samples: &[Vec<Symbol>], pick: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut c = vec![0.0; size];
    for i in pick {
        c[block_index(&samples[i], alpha)] += 1.0;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DbarEstimate {
    pub value: f64,
    /// Bootstrap standard error.
    pub se: f64,
    pub trials: usize,
}

/// Optimal-assignment d̄ between `trials` draws from each sampler, with a
/// bootstrap standard error.
///
/// Both samplers read the same generator streams, so identical samplers
/// give exactly 0.
pub fn dbar_empirical<P, Q, R>(
    sample_p: P,
    sample_q: Q,
    alpha: usize,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<DbarEstimate>
where
    P: Fn(&mut dyn RngCore) -> Vec<Symbol> + Sync,
    Q: Fn(&mut dyn RngCore) -> Vec<Symbol> + Sync,
    R: Rng + ?Sized,
{
    if trials < MIN_EMPIRICAL_TRIALS {
        return Err(Error::pre(format!(
            "empirical d̄ needs at least {MIN_EMPIRICAL_TRIALS} trials, got {trials}"
        )));
    }
    if n == 0 {
        return Err(Error::pre("empty blocks"));
    }
    let size = guarded_block_count(alpha, n, "Hamming graph nodes", MAX_LAW_BLOCKS)?;
    let base = mc::derive_seed(rng);
    let xs = mc::map_trials(base, trials, |_, r| sample_p(r));
    let ys = mc::map_trials(base, trials, |_, r| sample_q(r));
    for s in xs.iter().chain(&ys) {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: s.len(),
            });
        }
        crate::block::check_alphabet(s, alpha)?;
    }
    let scale = (trials * n) as f64;
    let value = matching_cost(
        alpha,
        n,
        &counts(alpha, size, &xs, 0..trials),
        &counts(alpha, size, &ys, 0..trials),
    )? / scale;

    let boot_seed = mc::derive_seed(rng);
    let reps: Vec<Result<f64>> = mc::map_trials(boot_seed, BOOTSTRAP_REPLICATES, |_, r| {
        let pick_x: Vec<usize> = (0..trials).map(|_| r.random_range(0..trials)).collect();
        let pick_y: Vec<usize> = (0..trials).map(|_| r.random_range(0..trials)).collect();
        Ok(matching_cost(
            alpha,
            n,
            &counts(alpha, size, &xs, pick_x.into_iter()),
            &counts(alpha, size, &ys, pick_y.into_iter()),
        )? / scale)
    });
    let reps: Vec<f64> = reps.into_iter().collect::<Result<_>>()?;
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let var = reps.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;
    Ok(DbarEstimate {
        value,
        se: var.sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::variational_distance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_cost(&[0, 1, 1, 0], &[0, 0, 1, 0]).unwrap(), 0.25);
        assert_eq!(hamming_cost(&[1, 1], &[0, 0]).unwrap(), 1.0);
        assert!(hamming_cost(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn exact_point_masses_and_identity() {
        let a = FiniteDistribution::point(2, &[0, 1, 1, 0]).unwrap();
        let b = FiniteDistribution::point(2, &[0, 0, 1, 0]).unwrap();
        let (v, c) = dbar_exact(&a, &b).unwrap();
        assert_eq!(v, 0.25);
        assert_eq!(c.marginal_error(&a, &b), 0.0);
        let p = FiniteDistribution::bernoulli(0.3, 3).unwrap();
        let (v, c) = dbar_exact(&p, &p).unwrap();
        assert_eq!(v, 0.0);
        let size = 8;
        for (k, &w) in c.table.iter().enumerate() {
            if k / size != k % size {
                assert_eq!(w, 0.0);
            }
        }
    }

    #[test]
    fn bernoulli_products_stay_at_letter_distance() {
        for n in [1, 2, 4] {
            let p = FiniteDistribution::bernoulli(0.3, n).unwrap();
            let q = FiniteDistribution::bernoulli(0.5, n).unwrap();
            let (v, c) = dbar_exact(&p, &q).unwrap();
            assert!((v - 0.2).abs() < 1e-9, "n={n}: {v}");
            assert!(c.marginal_error(&p, &q) < 1e-9);
            assert!((c.expected_hamming() - v).abs() < 1e-12);
            assert!(variational_distance(&p, &q).unwrap() >= 0.2 - 1e-12);
        }
    }

    #[test]
    fn exact_guard() {
        let p = FiniteDistribution::uniform(2, 11).unwrap();
        assert!(matches!(dbar_exact(&p, &p), Err(Error::Guard { .. })));
    }

    #[test]
    fn empirical_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let same = |r: &mut dyn RngCore| vec![r.random_range(0..2u8), r.random_range(0..2u8)];
        let z = dbar_empirical(same, same, 2, 2, 1000, &mut rng).unwrap();
        assert_eq!(z.value, 0.0);
        let pt = dbar_empirical(|_: &mut dyn RngCore| vec![0, 1, 1, 0], |_: &mut dyn RngCore| vec![0, 0, 1, 0], 2, 4, 1000, &mut rng)
            .unwrap();
        assert_eq!(pt.value, 0.25);
        assert!(dbar_empirical(same, same, 2, 2, 10, &mut rng).is_err());
    }
}
