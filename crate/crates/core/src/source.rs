//! Stationary sources: i.i.d. letters and finite Markov chains.

use rand::{Rng, RngCore};

use crate::block::{fill_block, guarded_block_count};
use crate::infotheory::{variational_distance, FiniteDistribution};
use crate::receiver::{sample_index, MAX_LAW_BLOCKS};
use crate::{Error, Result, Symbol};

pub trait SourceProcess: Send + Sync {
    fn alphabet(&self) -> usize;

    /// One trajectory `x_0 .. x_{len-1}`.
    fn sample_path(&self, len: usize, rng: &mut dyn RngCore) -> Result<Vec<Symbol>>;

    /// Law of `(x_offset, .., x_{offset+n-1})`.
    fn block_law_at(&self, offset: usize, n: usize) -> Result<FiniteDistribution>;

    fn block_law(&self, n: usize) -> Result<FiniteDistribution> {
        self.block_law_at(0, n)
    }
}

fn check_letter_law(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.len() > Symbol::MAX as usize + 1 {
        return Err(Error::invalid(format!("alphabet of {} letters", p.len())));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("letter law has a negative or non-finite entry"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("letter law sums to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IidSource {
    letter: Vec<f64>,
}

impl IidSource {
    pub fn new(letter: Vec<f64>) -> Result<Self> {
        check_letter_law(&letter)?;
        Ok(IidSource { letter })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        IidSource::new(vec![1.0 - p, p])
    }

    pub fn letter(&self) -> &[f64] {
        &self.letter
    }
}

impl SourceProcess for IidSource {
    fn alphabet(&self) -> usize {
        self.letter.len()
    }

    fn sample_path(&self, len: usize, rng: &mut dyn RngCore) -> Result<Vec<Symbol>> {
        Ok((0..len)
            .map(|_| sample_index(&self.letter, rng.random::<f64>()) as Symbol)
            .collect())
    }

    fn block_law_at(&self, _offset: usize, n: usize) -> Result<FiniteDistribution> {
        FiniteDistribution::iid(&self.letter, n)
    }
}

/// Finite Markov chain started from `initial`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSource {
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
}

impl MarkovSource {
    pub fn new(initial: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        check_letter_law(&initial)?;
        if transition.len() != initial.len() {
            return Err(Error::LengthMismatch {
                expected: initial.len(),
                actual: transition.len(),
            });
        }
        for row in &transition {
            if row.len() != initial.len() {
                return Err(Error::LengthMismatch {
                    expected: initial.len(),
                    actual: row.len(),
                });
            }
            check_letter_law(row)?;
        }
        Ok(MarkovSource { initial, transition })
    }

    /// The chain started from its stationary law, found by power iteration.
    pub fn stationary(transition: Vec<Vec<f64>>) -> Result<Self> {
        let q = transition.len();
        if q == 0 {
            return Err(Error::invalid("empty alphabet"));
        }
        let probe = MarkovSource::new(vec![1.0 / q as f64; q], transition)?;
        let mut pi = probe.initial.clone();
        for _ in 0..100_000 {
            // Lazy chain: same stationary law, no periodic oscillation.
            let next: Vec<f64> = probe.step(&pi).iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect();
            let moved = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
            pi = next;
            if moved < 1e-15 {
                let sum: f64 = pi.iter().sum();
                pi.iter_mut().for_each(|p| *p /= sum);
                return MarkovSource::new(pi, probe.transition);
            }
        }
        Err(Error::Numerical("stationary law did not converge".into()))
    }

    fn step(&self, law: &[f64]) -> Vec<f64> {
        let q = law.len();
        (0..q)
            .map(|b| (0..q).map(|a| law[a] * self.transition[a][b]).sum())
            .collect()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }
}

impl SourceProcess for MarkovSource {
    fn alphabet(&self) -> usize {
        self.initial.len()
    }

    fn sample_path(&self, len: usize, rng: &mut dyn RngCore) -> Result<Vec<Symbol>> {
        let mut path = Vec::with_capacity(len);
        if len == 0 {
            return Ok(path);
        }
        let mut state = sample_index(&self.initial, rng.random::<f64>());
        path.push(state as Symbol);
        for _ in 1..len {
            state = sample_index(&self.transition[state], rng.random::<f64>());
            path.push(state as Symbol);
        }
        Ok(path)
    }

    fn block_law_at(&self, offset: usize, n: usize) -> Result<FiniteDistribution> {
        let q = self.alphabet();
        let size = guarded_block_count(q, n, "distribution outcomes", MAX_LAW_BLOCKS)?;
        let mut start = self.initial.clone();
        for _ in 0..offset {
            start = self.step(&start);
        }
        let mut probs = vec![0.0; size];
        let mut b = vec![0; n];
        for (k, p) in probs.iter_mut().enumerate() {
            fill_block(k, q, &mut b);
            let mut v = b.first().map_or(1.0, |&a| start[a as usize]);
            for w in b.windows(2) {
                v *= self.transition[w[0] as usize][w[1] as usize];
            }
            *p = v;
        }
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        FiniteDistribution::new(q, n, probs)
    }
}

/// Largest variational distance between the block law at offset 0 and at
/// each of `offsets`; 0 for a stationary source.
pub fn stationarity_gap(source: &dyn SourceProcess, n: usize, offsets: &[usize]) -> Result<f64> {
    let base = source.block_law_at(0, n)?;
    offsets.iter().try_fold(0.0f64, |acc, &k| {
        Ok(acc.max(variational_distance(&base, &source.block_law_at(k, n)?)?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_markov_chain() {
        let chain = MarkovSource::stationary(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        assert!((chain.initial()[0] - 0.75).abs() < 1e-12);
        assert!(stationarity_gap(&chain, 3, &[1, 2, 5]).unwrap() < 1e-12);
        let skewed = MarkovSource::new(vec![1.0, 0.0], chain.transition().to_vec()).unwrap();
        assert!(stationarity_gap(&skewed, 2, &[1]).unwrap() > 0.05);
    }

    #[test]
    fn periodic_chain_has_stationary_law() {
        let flip = MarkovSource::stationary(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((flip.initial()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn iid_paths_have_the_right_frequency() {
        let src = IidSource::bernoulli(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let path = src.sample_path(20_000, &mut rng).unwrap();
        let f = path.iter().filter(|&&a| a == 1).count() as f64 / 20_000.0;
        assert!((f - 0.3).abs() < 0.015);
        assert_eq!(stationarity_gap(&src, 4, &[3]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(IidSource::new(vec![0.5, 0.6]).is_err());
        assert!(MarkovSource::new(vec![1.0], vec![vec![0.5, 0.5]]).is_err());
    }
}
