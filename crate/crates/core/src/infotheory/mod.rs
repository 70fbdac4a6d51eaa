//! Distances between block laws, information functionals, and the window,
//! continuity and mixing diagnostics. Entropies are in bits.

mod dbar;
mod scans;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::block::{self, block_index, fill_block, guarded_block_count};
use crate::mc;
use crate::receiver::{BlockChannel, ExactLaw, MAX_LAW_BLOCKS};
use crate::source::SourceProcess;
use crate::{Error, Result, Symbol};

pub use dbar::{dbar_empirical, dbar_exact, hamming_cost, DbarEstimate, MAX_COUPLING_CELLS};
pub use scans::{
    adima_scan, adversarial_pairs, dbar_continuity_scan, strong_mixing_scan, AdimaPoint, ContinuityPoint,
    MixingPoint, MixingSpec, MIN_ADIMA_PAIRS,
};

const MASS_TOL: f64 = 1e-9;

/// A probability law on the blocks `A^n` of a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    q: usize,
    n: usize,
    probs: Vec<f64>,
    letter: Option<Vec<f64>>,
}

fn validate_law(probs: &[f64], what: &str) -> Result<()> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > MASS_TOL {
        return Err(Error::invalid(format!("{what} sums to {sum}")));
    }
    Ok(())
}

impl FiniteDistribution {
    /// Law given by its probabilities, indexed by block index.
    pub fn new(q: usize, n: usize, probs: Vec<f64>) -> Result<Self> {
        let size = guarded_block_count(q, n, "distribution outcomes", MAX_LAW_BLOCKS)?;
        if probs.len() != size {
            return Err(Error::LengthMismatch {
                expected: size,
                actual: probs.len(),
            });
        }
        validate_law(&probs, "distribution")?;
        Ok(FiniteDistribution {
            q,
            n,
            probs,
            letter: None,
        })
    }

    /// Product law `letter^⊗n`.
    pub fn iid(letter: &[f64], n: usize) -> Result<Self> {
        validate_law(letter, "letter law")?;
        let q = letter.len();
        let size = guarded_block_count(q, n, "distribution outcomes", MAX_LAW_BLOCKS)?;
        let mut probs = vec![1.0; size];
        let mut b = vec![0; n];
        for (k, p) in probs.iter_mut().enumerate() {
            fill_block(k, q, &mut b);
            *p = b.iter().map(|&a| letter[a as usize]).product();
        }
        Ok(FiniteDistribution {
            q,
            n,
            probs,
            letter: Some(letter.to_vec()),
        })
    }

    pub fn bernoulli(p: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("Bernoulli parameter {p} outside [0, 1]")));
        }
        FiniteDistribution::iid(&[1.0 - p, p], n)
    }

    pub fn uniform(q: usize, n: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("empty alphabet"));
        }
        FiniteDistribution::iid(&vec![1.0 / q as f64; q], n)
    }

    pub fn point(q: usize, block: &[Symbol]) -> Result<Self> {
        block::check_alphabet(block, q)?;
        let size = guarded_block_count(q, block.len(), "distribution outcomes", MAX_LAW_BLOCKS)?;
        let mut probs = vec![0.0; size];
        probs[block_index(block, q)] = 1.0;
        Ok(FiniteDistribution {
            q,
            n: block.len(),
            probs,
            letter: None,
        })
    }

    /// Empirical law of a sample of blocks.
    pub fn empirical(q: usize, n: usize, samples: &[Vec<Symbol>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::pre("empirical law of an empty sample"));
        }
        let size = guarded_block_count(q, n, "distribution outcomes", MAX_LAW_BLOCKS)?;
        let mut probs = vec![0.0; size];
        for s in samples {
            if s.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: s.len(),
                });
            }
            block::check_alphabet(s, q)?;
            probs[block_index(s, q)] += 1.0;
        }
        let total = samples.len() as f64;
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(FiniteDistribution {
            q,
            n,
            probs,
            letter: None,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The per-letter law when this is a product law.
    pub fn letter(&self) -> Option<&[f64]> {
        self.letter.as_deref()
    }

    pub fn prob(&self, block: &[Symbol]) -> f64 {
        if block.len() != self.n || block.iter().any(|&a| a as usize >= self.q) {
            return 0.0;
        }
        self.probs[block_index(block, self.q)]
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<Symbol> {
        match &self.letter {
            Some(letter) => (0..self.n)
                .map(|_| crate::receiver::sample_index(letter, rng.random::<f64>()) as Symbol)
                .collect(),
            None => block::block_at(
                crate::receiver::sample_index(&self.probs, rng.random::<f64>()),
                self.q,
                self.n,
            ),
        }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.q != other.q || self.n != other.n {
            return Err(Error::pre(format!(
                "outcome sets differ: {}^{} vs {}^{}",
                self.q, self.n, other.q, other.n
            )));
        }
        Ok(())
    }
}

/// A joint law on pairs of blocks with declared marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub q: usize,
    pub n: usize,
    /// Row-major table; rows index the first marginal's blocks.
    pub table: Vec<f64>,
}

impl Coupling {
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let size = self.q.pow(self.n as u32);
        let mut rows = vec![0.0; size];
        let mut cols = vec![0.0; size];
        for (k, &p) in self.table.iter().enumerate() {
            rows[k / size] += p;
            cols[k % size] += p;
        }
        (rows, cols)
    }

    /// Largest deviation of the marginals from `p` and `q`.
    pub fn marginal_error(&self, p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
        let (rows, cols) = self.marginals();
        rows.iter()
            .zip(p.probs())
            .chain(cols.iter().zip(q.probs()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Expected normalized Hamming distance under the coupling.
    pub fn expected_hamming(&self) -> f64 {
        let size = self.q.pow(self.n as u32);
        let (mut u, mut w) = (vec![0; self.n], vec![0; self.n]);
        let mut total = 0.0;
        for (k, &p) in self.table.iter().enumerate() {
            if p > 0.0 {
                fill_block(k / size, self.q, &mut u);
                fill_block(k % size, self.q, &mut w);
                total += p * hamming_count(&u, &w) as f64;
            }
        }
        total / self.n as f64
    }
}

pub(crate) fn hamming_count(u: &[Symbol], w: &[Symbol]) -> usize {
    u.iter().zip(w).filter(|(a, b)| a != b).count()
}

/// `sup_G |P(G) − Q(G)|`, i.e. half the L1 distance.
pub fn variational_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    p.same_space(q)?;
    Ok(0.5 * p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector in bits.
pub fn entropy_of(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plogp(p)).sum()
}

/// Block entropy `H(X_1..X_n)` in bits.
pub fn entropy(p: &FiniteDistribution) -> f64 {
    entropy_of(&p.probs)
}

pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

fn check_pair(source: &FiniteDistribution, channel: &BlockChannel) -> Result<()> {
    if source.n != channel.n() {
        return Err(Error::LengthMismatch {
            expected: channel.n(),
            actual: source.n,
        });
    }
    if source.q != channel.input_alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "source has {} letters, channel reads {}",
            source.q,
            channel.input_alphabet()
        )));
    }
    if !channel.is_exact() {
        return Err(Error::SamplerOnly("exact channel law required".into()));
    }
    Ok(())
}

/// Output law `P_Y` of a source through an exact channel, kept in product
/// form when both factor per letter.
#[derive(Debug, Clone)]
pub enum OutputLaw {
    Product { letter: Vec<f64>, n: usize },
    Dense(FiniteDistribution),
}

impl OutputLaw {
    pub fn new(source: &FiniteDistribution, channel: &BlockChannel) -> Result<Self> {
        check_pair(source, channel)?;
        if let (Some(letter), Some(ExactLaw::Memoryless(spec))) = (source.letter(), channel.exact()) {
            let out = (0..spec.outputs())
                .map(|b| {
                    letter
                        .iter()
                        .enumerate()
                        .map(|(a, &p)| p * spec.prob(a as Symbol, b as Symbol))
                        .sum()
                })
                .collect();
            return Ok(OutputLaw::Product {
                letter: out,
                n: source.n,
            });
        }
        let cols = guarded_block_count(channel.output_alphabet(), source.n, "output law", MAX_LAW_BLOCKS)?;
        let mut out = vec![0.0; cols];
        let mut x = vec![0; source.n];
        for (k, &p) in source.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            fill_block(k, source.q, &mut x);
            for (o, v) in out.iter_mut().zip(channel.row(&x)?) {
                *o += p * v;
            }
        }
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= sum);
        Ok(OutputLaw::Dense(FiniteDistribution::new(channel.output_alphabet(), source.n, out)?))
    }

    pub fn prob(&self, y: &[Symbol]) -> f64 {
        match self {
            OutputLaw::Product { letter, n } => {
                if y.len() != *n {
                    return 0.0;
                }
                y.iter().map(|&b| letter.get(b as usize).copied().unwrap_or(0.0)).product()
            }
            OutputLaw::Dense(d) => d.prob(y),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            OutputLaw::Product { letter, n } => *n as f64 * entropy_of(letter),
            OutputLaw::Dense(d) => entropy(d),
        }
    }
}

/// `(1/n) I(X^n; Y^n)` in bits per symbol, from the joint table.
pub fn mutual_information_exact(source: &FiniteDistribution, channel: &BlockChannel) -> Result<f64> {
    let output = OutputLaw::new(source, channel)?;
    let n = source.n;
    let mut x = vec![0; n];
    let mut joint = 0.0;
    for (k, &p) in source.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        fill_block(k, source.q, &mut x);
        joint += channel.row(&x)?.into_iter().map(|w| plogp(p * w)).sum::<f64>();
    }
    Ok((entropy(source) + output.entropy() - joint) / n as f64)
}

/// Evaluates the sample mutual information `i_n(x, y)` for a fixed source
/// and exact channel.
#[derive(Debug, Clone)]
pub struct InformationDensity<'a> {
    source: &'a FiniteDistribution,
    channel: &'a BlockChannel,
    output: OutputLaw,
}

impl<'a> InformationDensity<'a> {
    pub fn new(source: &'a FiniteDistribution, channel: &'a BlockChannel) -> Result<Self> {
        Ok(InformationDensity {
            source,
            channel,
            output: OutputLaw::new(source, channel)?,
        })
    }

    pub fn output_law(&self) -> &OutputLaw {
        &self.output
    }

    /// `(1/n) log2 [P(y|x) / P_Y(y)]`; errors when `μ(x)`, `P(y|x)` or
    /// `P_Y(y)` vanishes.
    pub fn eval(&self, x: &[Symbol], y: &[Symbol]) -> Result<f64> {
        let px = self.source.prob(x);
        let pyx = self.channel.likelihood(x, y)?;
        let py = self.output.prob(y);
        if px <= 0.0 || pyx <= 0.0 || py <= 0.0 {
            return Err(Error::ZeroProbability(format!(
                "pair has μ(x) = {px}, P(y|x) = {pyx}, P(y) = {py}"
            )));
        }
        Ok((pyx.log2() - py.log2()) / self.source.n as f64)
    }
}

pub fn sample_mutual_information(
    x: &[Symbol],
    y: &[Symbol],
    source: &FiniteDistribution,
    channel: &BlockChannel,
) -> Result<f64> {
    InformationDensity::new(source, channel)?.eval(x, y)
}

/// `E_{μν} i_n`, summed over the joint table.
pub fn mean_information_density(source: &FiniteDistribution, channel: &BlockChannel) -> Result<f64> {
    let density = InformationDensity::new(source, channel)?;
    let n = source.n;
    let (mut x, mut y) = (vec![0; n], vec![0; n]);
    let mut total = 0.0;
    for (k, &p) in source.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        fill_block(k, source.q, &mut x);
        for (c, w) in channel.row(&x)?.into_iter().enumerate() {
            if w > 0.0 {
                fill_block(c, channel.output_alphabet(), &mut y);
                total += p * w * density.eval(&x, &y)?;
            }
        }
    }
    Ok(total)
}

/// Draws of `i_n` under the joint law, with zero-probability pairs
/// counted and left out.
#[derive(Debug, Clone, Serialize)]
pub struct InformationSamples {
    pub values: Vec<f64>,
    pub excluded: usize,
}

/// Samples `i_n` with `x ~ source` and `y` from the channel's simulator
/// (the physical channel when one is attached, otherwise the exact law),
/// evaluated against the exact law.
pub fn sample_information_density<R: Rng + ?Sized>(
    source: &FiniteDistribution,
    channel: &BlockChannel,
    trials: usize,
    rng: &mut R,
) -> Result<InformationSamples> {
    let density = InformationDensity::new(source, channel)?;
    let base = mc::derive_seed(rng);
    let draws = mc::map_trials(base, trials, |_, rng| {
        let x = source.sample(rng);
        let y = channel.sample_unchecked(&x, rng);
        density.eval(&x, &y).ok()
    });
    let excluded = draws.iter().filter(|d| d.is_none()).count();
    Ok(InformationSamples {
        values: draws.into_iter().flatten().collect(),
        excluded,
    })
}

/// `C*(λ) = sup{r : F(r) < λ}` for the empirical distribution `F` of the
/// samples.
pub fn quantile_capacity(samples: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("λ = {lambda} outside (0, 1)")));
    }
    if samples.is_empty() {
        return Err(Error::pre("no information-density samples"));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN information-density sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (lambda * sorted.len() as f64).ceil() as usize;
    Ok(sorted[k.clamp(1, sorted.len()) - 1])
}

/// A cylinder event on sequences, or one of the trivial events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    Full,
    Empty,
    /// `{x : x[start + i] = symbols[i]}`.
    Cylinder { start: i64, symbols: Vec<Symbol> },
}

impl Event {
    pub fn cylinder(start: i64, symbols: Vec<Symbol>) -> Self {
        Event::Cylinder { start, symbols }
    }

    /// Positions the event looks at, shifted by `k`.
    pub fn span(&self, k: i64) -> Option<std::ops::Range<i64>> {
        match self {
            Event::Cylinder { start, symbols } if !symbols.is_empty() => {
                Some(start + k..start + k + symbols.len() as i64)
            }
            _ => None,
        }
    }

    /// Whether `T^k x` lies in the event, reading `x` from `path`
    /// positioned at `origin`.
    pub fn contains(&self, path: &[Symbol], origin: i64, k: i64) -> bool {
        match self {
            Event::Full => true,
            Event::Empty => false,
            Event::Cylinder { start, symbols } => symbols.iter().enumerate().all(|(i, &a)| {
                let t = start + k + i as i64 - origin;
                t >= 0 && (t as usize) < path.len() && path[t as usize] == a
            }),
        }
    }
}

/// Time average `(1/N) Σ_{k<N} χ_F(T^k x)` along one trajectory of the
/// source.
pub fn ergodic_mean_check(
    source: &dyn SourceProcess,
    event: &Event,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::pre("horizon must be at least 1"));
    }
    match event {
        Event::Full => return Ok(1.0),
        Event::Empty => return Ok(0.0),
        Event::Cylinder { start, .. } if *start < 0 => {
            return Err(Error::pre("cylinder must start at a nonnegative position"));
        }
        Event::Cylinder { .. } => {}
    }
    let reach = event.span(0).map_or(0, |r| r.end.max(0) as usize);
    let path = source.sample_path(horizon + reach, rng)?;
    let hits = (0..horizon).filter(|&k| event.contains(&path, 0, k as i64)).count();
    Ok(hits as f64 / horizon as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver::{dmc_block, DmcSpec};
    use crate::source::IidSource;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn variational_examples() {
        let p = FiniteDistribution::bernoulli(0.3, 1).unwrap();
        let q = FiniteDistribution::bernoulli(0.5, 1).unwrap();
        assert!((variational_distance(&p, &q).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(variational_distance(&p, &p).unwrap(), 0.0);
        let a = FiniteDistribution::point(2, &[0, 1]).unwrap();
        let b = FiniteDistribution::point(2, &[1, 1]).unwrap();
        assert_eq!(variational_distance(&a, &b).unwrap(), 1.0);
        assert!(variational_distance(&a, &p).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&FiniteDistribution::point(2, &[1]).unwrap()), 0.0);
        assert_eq!(entropy(&FiniteDistribution::uniform(2, 1).unwrap()), 1.0);
        let h = entropy(&FiniteDistribution::bernoulli(0.11, 1).unwrap());
        assert!((h - 0.499_915_958_164_528).abs() < 1e-12);
    }

    #[test]
    fn identity_and_bsc_information() {
        let id = dmc_block(&DmcSpec::identity(2).unwrap(), 3).unwrap();
        let u = FiniteDistribution::uniform(2, 3).unwrap();
        assert!((mutual_information_exact(&u, &id).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sample_mutual_information(&[0, 1, 1], &[0, 1, 1], &u, &id).unwrap(), 1.0);
        assert!(matches!(
            sample_mutual_information(&[0, 1, 1], &[1, 1, 1], &u, &id),
            Err(Error::ZeroProbability(_))
        ));

        let bsc = dmc_block(&DmcSpec::bsc(0.11).unwrap(), 1).unwrap();
        let u1 = FiniteDistribution::uniform(2, 1).unwrap();
        let target = 1.0 - 0.499_915_958_164_528;
        assert!((mutual_information_exact(&u1, &bsc).unwrap() - target).abs() < 1e-12);
    }

    #[test]
    fn independent_channel_carries_nothing() {
        let spec = DmcSpec::constant(2, vec![0.3, 0.7]).unwrap();
        let ch = dmc_block(&spec, 2).unwrap();
        let src = FiniteDistribution::bernoulli(0.4, 2).unwrap();
        assert!(mutual_information_exact(&src, &ch).unwrap().abs() < 1e-12);
        assert_eq!(sample_mutual_information(&[1, 0], &[0, 1], &src, &ch).unwrap(), 0.0);
    }

    #[test]
    fn product_and_dense_output_laws_agree() {
        let spec = DmcSpec::bsc(0.2).unwrap();
        let mem = dmc_block(&spec, 3).unwrap();
        let dense = BlockChannel::dense(2, 2, 3, mem.matrix().unwrap()).unwrap();
        let src = FiniteDistribution::bernoulli(0.3, 3).unwrap();
        let a = mutual_information_exact(&src, &mem).unwrap();
        let b = mutual_information_exact(&src, &dense).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile_capacity(&[0.7; 10], 0.05).unwrap(), 0.7);
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantile_capacity(&s, 0.1).unwrap(), 1.0);
        assert_eq!(quantile_capacity(&s, 0.25).unwrap(), 3.0);
        assert!(quantile_capacity(&s, 0.0).is_err());
        assert!(quantile_capacity(&[], 0.5).is_err());
    }

    #[test]
    fn ergodic_mean_trivial_events() {
        let src = IidSource::bernoulli(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(ergodic_mean_check(&src, &Event::Full, 100, &mut rng).unwrap(), 1.0);
        assert_eq!(ergodic_mean_check(&src, &Event::Empty, 100, &mut rng).unwrap(), 0.0);
    }
}
