//! Block codes, maximum-likelihood decoding and Monte-Carlo code
//! evaluation.
//!
//! Codeword indices are 0-based.

use std::collections::HashSet;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::block::{self, block_count, block_index, fill_block};
use crate::infotheory::{entropy_of, FiniteDistribution};
use crate::mc;
use crate::receiver::{sample_index, BlockChannel, DmcSpec, ExactLaw, MAX_LAW_BLOCKS};
use crate::{Error, Result, Symbol};

/// Log-likelihoods closer than this count as tied.
pub const TIE_TOL: f64 = 1e-10;
/// Fewest Monte-Carlo trials per codeword in [`evaluate_code`].
pub const MIN_TRIALS_PER_CODEWORD: usize = 1000;
/// Largest code the experiments will build.
pub const MAX_CODEWORDS: usize = 1 << 14;

const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockCode {
    alphabet: usize,
    n: usize,
    codewords: Vec<Vec<Symbol>>,
}

impl BlockCode {
    pub fn new(alphabet: usize, codewords: Vec<Vec<Symbol>>) -> Result<Self> {
        let n = codewords.first().map(Vec::len).ok_or_else(|| Error::invalid("a code needs a codeword"))?;
        if n == 0 {
            return Err(Error::invalid("codewords must be nonempty"));
        }
        let mut seen = HashSet::new();
        for w in &codewords {
            if w.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: w.len(),
                });
            }
            block::check_alphabet(w, alphabet)?;
            if !seen.insert(w.as_slice()) {
                return Err(Error::invalid(format!("repeated codeword {w:?}")));
            }
        }
        Ok(BlockCode {
            alphabet,
            n,
            codewords,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codeword(&self, i: usize) -> &[Symbol] {
        &self.codewords[i]
    }

    pub fn codewords(&self) -> &[Vec<Symbol>] {
        &self.codewords
    }

    /// `(1/n) log2 M`.
    pub fn rate(&self) -> f64 {
        (self.len() as f64).log2() / self.n as f64
    }
}

/// `m` distinct codewords drawn from `letter^⊗n`, redrawing collisions.
pub fn random_code<R: Rng + ?Sized>(m: usize, n: usize, letter: &[f64], rng: &mut R) -> Result<BlockCode> {
    let q = letter.len();
    if m == 0 || n == 0 {
        return Err(Error::invalid("a code needs m >= 1 and n >= 1"));
    }
    crate::source::IidSource::new(letter.to_vec())?;
    let support = letter.iter().filter(|&&p| p > 0.0).count();
    let room = block_count(support, n).unwrap_or(usize::MAX);
    if m > room {
        return Err(Error::invalid(format!("{m} codewords cannot be distinct in {room} reachable blocks")));
    }
    let mut seen = HashSet::with_capacity(m);
    let mut codewords = Vec::with_capacity(m);
    while codewords.len() < m {
        let w: Vec<Symbol> = (0..n).map(|_| sample_index(letter, rng.random::<f64>()) as Symbol).collect();
        if seen.insert(w.clone()) {
            codewords.push(w);
        }
    }
    BlockCode::new(q, codewords)
}

fn check_code_channel(code: &BlockCode, channel: &BlockChannel) -> Result<()> {
    if code.n != channel.n() {
        return Err(Error::LengthMismatch {
            expected: channel.n(),
            actual: code.n,
        });
    }
    if code.alphabet != channel.input_alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "code over {} letters, channel reads {}",
            code.alphabet,
            channel.input_alphabet()
        )));
    }
    Ok(())
}

fn argmax_ll(lls: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, ll) in lls.enumerate() {
        if ll > best.1 + TIE_TOL || (best.1 == f64::NEG_INFINITY && ll > best.1) {
            best = (i, ll);
        }
    }
    best.0
}

/// `argmax_i P(y | w_i)`, smallest index among ties.
pub fn ml_decode(y: &[Symbol], code: &BlockCode, channel: &BlockChannel) -> Result<usize> {
    check_code_channel(code, channel)?;
    if !channel.is_exact() {
        return Err(Error::SamplerOnly("maximum-likelihood decoding needs an exact law".into()));
    }
    channel.likelihood(code.codeword(0), y)?;
    Ok(argmax_ll(
        code.codewords.iter().map(|w| channel.likelihood_unchecked(w, y).ln()),
    ))
}

/// Precomputed maximum-likelihood decisions for every output block, or
/// direct decoding when the output space is too large to tabulate.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    code: &'a BlockCode,
    channel: &'a BlockChannel,
    table: Option<Vec<u32>>,
}

impl<'a> Decoder<'a> {
    pub fn new(code: &'a BlockCode, channel: &'a BlockChannel) -> Result<Self> {
        check_code_channel(code, channel)?;
        if !channel.is_exact() {
            return Err(Error::SamplerOnly("maximum-likelihood decoding needs an exact law".into()));
        }
        let q_out = channel.output_alphabet();
        let table = match block_count(q_out, code.n) {
            Some(size) if size <= MAX_LAW_BLOCKS => Some(match channel.exact() {
                Some(ExactLaw::Memoryless(spec)) => memoryless_table(code, spec, size),
                _ => generic_table(code, channel, size),
            }),
            _ => None,
        };
        Ok(Decoder { code, channel, table })
    }

    pub fn decode(&self, y: &[Symbol]) -> usize {
        match &self.table {
            Some(t) => t[block_index(y, self.channel.output_alphabet())] as usize,
            None => argmax_ll(
                self.code
                    .codewords
                    .iter()
                    .map(|w| self.channel.likelihood_unchecked(w, y).ln()),
            ),
        }
    }
}

fn generic_table(code: &BlockCode, channel: &BlockChannel, size: usize) -> Vec<u32> {
    let mut y = vec![0; code.n];
    (0..size)
        .map(|k| {
            fill_block(k, channel.output_alphabet(), &mut y);
            argmax_ll(code.codewords.iter().map(|w| channel.likelihood_unchecked(w, &y).ln())) as u32
        })
        .collect()
}

/// Decision table for a memoryless law: the log-likelihood splits over
/// chunks of `CHUNK` positions, each tabulated per codeword.
fn memoryless_table(code: &BlockCode, spec: &DmcSpec, size: usize) -> Vec<u32> {
    let q = spec.outputs();
    let n = code.n;
    let bounds: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(n))).collect();
    let mut chunk_tables: Vec<Vec<f64>> = Vec::with_capacity(bounds.len());
    for &(s, e) in &bounds {
        let width = q.pow((e - s) as u32);
        let mut table = Vec::with_capacity(width * code.len());
        let mut y = vec![0; e - s];
        for w in &code.codewords {
            for k in 0..width {
                fill_block(k, q, &mut y);
                table.push(
                    w[s..e]
                        .iter()
                        .zip(&y)
                        .map(|(&a, &b)| spec.prob(a, b).ln())
                        .sum::<f64>(),
                );
            }
        }
        chunk_tables.push(table);
    }
    let widths: Vec<usize> = bounds.iter().map(|&(s, e)| q.pow((e - s) as u32)).collect();
    let mut parts = vec![0usize; bounds.len()];
    (0..size)
        .map(|k| {
            // Big-endian block index: later chunks are the low digits.
            let mut rest = k;
            for c in (0..bounds.len()).rev() {
                parts[c] = rest % widths[c];
                rest /= widths[c];
            }
            argmax_ll((0..code.len()).map(|i| {
                parts
                    .iter()
                    .zip(&chunk_tables)
                    .zip(&widths)
                    .map(|((&p, t), &w)| t[i * w + p])
                    .sum()
            })) as u32
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeEvaluation {
    /// Largest per-codeword error estimate.
    pub lambda_max: f64,
    pub lambda_max_se: f64,
    pub average: f64,
    pub per_codeword: Vec<f64>,
    pub trials_per_codeword: usize,
}

/// Monte-Carlo block error of `code` over `channel` with maximum-likelihood
/// decoding against the channel's exact law. Transmission uses the
/// channel's sampler when one is attached.
pub fn evaluate_code<R: Rng + ?Sized>(
    code: &BlockCode,
    channel: &BlockChannel,
    trials: usize,
    rng: &mut R,
) -> Result<CodeEvaluation> {
    if trials < MIN_TRIALS_PER_CODEWORD {
        return Err(Error::pre(format!(
            "need at least {MIN_TRIALS_PER_CODEWORD} trials per codeword, got {trials}"
        )));
    }
    let decoder = Decoder::new(code, channel)?;
    let m = code.len();
    let base = mc::derive_seed(rng);
    let errors = mc::fold_trials(
        base,
        m * trials,
        || vec![0usize; m],
        |acc, t, rng| {
            let i = t / trials;
            let y = channel.sample_unchecked(code.codeword(i), rng);
            if decoder.decode(&y) != i {
                acc[i] += 1;
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    let per_codeword: Vec<f64> = errors.iter().map(|&e| e as f64 / trials as f64).collect();
    let (worst, lambda_max) = per_codeword
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, p)| if p > b.1 { (i, p) } else { b });
    Ok(CodeEvaluation {
        lambda_max,
        lambda_max_se: mc::bernoulli_se(per_codeword[worst], trials),
        average: per_codeword.iter().sum::<f64>() / m as f64,
        per_codeword,
        trials_per_codeword: trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodingPoint {
    pub n: usize,
    pub rate_factor: f64,
    pub rate: f64,
    pub codewords: usize,
    /// Smallest `λ̂_max` among the random codes tried.
    pub lambda_max: f64,
    pub lambda_max_se: f64,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodingReport {
    pub capacity: f64,
    pub points: Vec<CodingPoint>,
}

impl CodingReport {
    /// `λ̂_max(n)` for `rate_factor`, in order of increasing `n`.
    pub fn curve(&self, rate_factor: f64) -> Vec<&CodingPoint> {
        let mut c: Vec<&CodingPoint> = self.points.iter().filter(|p| p.rate_factor == rate_factor).collect();
        c.sort_by_key(|p| p.n);
        c
    }
}

/// Random codes with `M = ⌈2^{nR}⌉` codewords at `R = factor · capacity`
/// for each factor and block length, keeping the best of `codes` draws.
///
/// `channel_at(n)` builds the channel used at block length `n`.
pub fn coding_theorem_experiment<F, R>(
    channel_at: F,
    capacity: f64,
    rate_factors: &[f64],
    n_values: &[usize],
    codes: usize,
    trials: usize,
    rng: &mut R,
) -> Result<CodingReport>
where
    F: Fn(usize) -> Result<BlockChannel>,
    R: Rng + ?Sized,
{
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(Error::invalid(format!("capacity estimate {capacity} must be positive")));
    }
    if codes == 0 {
        return Err(Error::pre("need at least one code per point"));
    }
    let mut points = Vec::new();
    for &n in n_values {
        let channel = channel_at(n)?;
        let q = channel.input_alphabet();
        let uniform = vec![1.0 / q as f64; q];
        for &factor in rate_factors {
            let target = factor * capacity;
            let m = (target * n as f64).exp2().ceil() as usize;
            let room = block_count(q, n).unwrap_or(usize::MAX);
            if m > room.min(MAX_CODEWORDS) {
                return Err(Error::Guard {
                    guard: "codewords",
                    limit: room.min(MAX_CODEWORDS),
                    actual: m,
                });
            }
            let mut best: Option<CodeEvaluation> = None;
            for _ in 0..codes {
                let code = random_code(m, n, &uniform, rng)?;
                let eval = evaluate_code(&code, &channel, trials, rng)?;
                if best.as_ref().is_none_or(|b| eval.lambda_max < b.lambda_max) {
                    best = Some(eval);
                }
            }
            let best = best.expect("at least one code");
            points.push(CodingPoint {
                n,
                rate_factor: factor,
                rate: (m as f64).log2() / n as f64,
                codewords: m,
                lambda_max: best.lambda_max,
                lambda_max_se: best.lambda_max_se,
                average: best.average,
            });
        }
    }
    Ok(CodingReport { capacity, points })
}

/// How source blocks are mapped onto channel inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceScheme {
    /// Source blocks go over the channel unchanged.
    Identity,
    /// The `⌈2^{n R}⌉` most probable source blocks are indexed and sent
    /// with a random channel code; other blocks count as errors.
    TypicalSet { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceChannelReport {
    pub error_rate: f64,
    pub se: f64,
    /// Source mass outside the indexed set.
    pub uncovered_mass: f64,
    pub source_entropy: f64,
    pub codewords: usize,
    pub trials: usize,
}

/// End-to-end block error of sending an i.i.d. source over `channel`.
pub fn source_channel_experiment<R: Rng + ?Sized>(
    letter: &[f64],
    channel: &BlockChannel,
    scheme: &SourceScheme,
    trials: usize,
    rng: &mut R,
) -> Result<SourceChannelReport> {
    let n = channel.n();
    let q_in = channel.input_alphabet();
    let h = entropy_of(letter);
    if h > (q_in as f64).log2() + 1e-12 {
        return Err(Error::invalid(format!(
            "source entropy {h} bits exceeds log2 of the {q_in}-letter channel alphabet"
        )));
    }
    if trials == 0 {
        return Err(Error::pre("trials must be at least 1"));
    }
    let source = FiniteDistribution::iid(letter, n)?;
    let base = mc::derive_seed(rng);
    match scheme {
        SourceScheme::Identity => {
            if letter.len() != q_in {
                return Err(Error::AlphabetMismatch(format!(
                    "identity scheme needs a {q_in}-letter source, got {}",
                    letter.len()
                )));
            }
            let all: Vec<Vec<Symbol>> = (0..block_count(q_in, n).unwrap_or(0))
                .map(|k| block::block_at(k, q_in, n))
                .collect();
            let code = BlockCode::new(q_in, all)?;
            let decoder = Decoder::new(&code, channel)?;
            let errors = mc::count_hits(base, trials, |rng| {
                let u = source.sample(rng);
                let y = channel.sample_unchecked(&u, rng);
                code.codeword(decoder.decode(&y)) != u.as_slice()
            });
            let p = errors as f64 / trials as f64;
            Ok(SourceChannelReport {
                error_rate: p,
                se: mc::bernoulli_se(p, trials),
                uncovered_mass: 0.0,
                source_entropy: h,
                codewords: code.len(),
                trials,
            })
        }
        SourceScheme::TypicalSet { rate } => {
            let m = (rate * n as f64).exp2().ceil() as usize;
            let room = block_count(q_in, n).unwrap_or(usize::MAX);
            if m > room.min(MAX_CODEWORDS) {
                return Err(Error::Guard {
                    guard: "codewords",
                    limit: room.min(MAX_CODEWORDS),
                    actual: m,
                });
            }
            let mut order: Vec<usize> = (0..source.probs().len()).collect();
            order.sort_by(|&a, &b| source.probs()[b].total_cmp(&source.probs()[a]).then(a.cmp(&b)));
            let mut index_of = vec![usize::MAX; source.probs().len()];
            for (i, &k) in order.iter().take(m).enumerate() {
                index_of[k] = i;
            }
            let uncovered = 1.0 - order.iter().take(m).map(|&k| source.probs()[k]).sum::<f64>();
            let uniform = vec![1.0 / q_in as f64; q_in];
            let code = random_code(m, n, &uniform, rng)?;
            let decoder = Decoder::new(&code, channel)?;
            let q_src = letter.len();
            let errors = mc::count_hits(base, trials, |rng| {
                let u = source.sample(rng);
                let idx = index_of[block_index(&u, q_src)];
                if idx == usize::MAX {
                    // Not indexed: a fixed fallback codeword is still sent.
                    channel.sample_unchecked(code.codeword(0), rng);
                    return true;
                }
                let y = channel.sample_unchecked(code.codeword(idx), rng);
                decoder.decode(&y) != idx
            });
            let p = errors as f64 / trials as f64;
            Ok(SourceChannelReport {
                error_rate: p,
                se: mc::bernoulli_se(p, trials),
                uncovered_mass: uncovered.max(0.0),
                source_entropy: h,
                codewords: m,
                trials,
            })
        }
    }
}

/// Per-letter transition matrix fitted to `trials` simulated blocks with
/// uniform input, pooled over positions. Serves as a memoryless decoding
/// model for channels known only through a sampler.
pub fn fitted_memoryless_model<R: Rng + ?Sized>(
    channel: &BlockChannel,
    trials: usize,
    rng: &mut R,
) -> Result<DmcSpec> {
    let (qi, qo, n) = (channel.input_alphabet(), channel.output_alphabet(), channel.n());
    if trials == 0 {
        return Err(Error::pre("trials must be at least 1"));
    }
    let base = mc::derive_seed(rng);
    let counts = mc::fold_trials(
        base,
        trials,
        || vec![0usize; qi * qo],
        |acc, _, rng| {
            let x: Vec<Symbol> = (0..n).map(|_| rng.random_range(0..qi) as Symbol).collect();
            let y = channel.sample_unchecked(&x, rng);
            for (&a, &b) in x.iter().zip(&y) {
                acc[a as usize * qo + b as usize] += 1;
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    // Add-half smoothing keeps every transition possible.
    let rows = counts
        .chunks(qo)
        .map(|row| {
            let total = row.iter().sum::<usize>() as f64 + 0.5 * qo as f64;
            row.iter().map(|&c| (c as f64 + 0.5) / total).collect()
        })
        .collect();
    DmcSpec::new(rows)
}

/// Uniform random block.
pub fn uniform_block(q: usize, n: usize, rng: &mut dyn RngCore) -> Vec<Symbol> {
    (0..n).map(|_| rng.random_range(0..q) as Symbol).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver::dmc_block;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bsc(p: f64, n: usize) -> BlockChannel {
        dmc_block(&DmcSpec::bsc(p).unwrap(), n).unwrap()
    }

    #[test]
    fn code_validation_and_rate() {
        let c = BlockCode::new(2, vec![vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        assert_eq!(c.rate(), 1.0 / 3.0);
        assert!(BlockCode::new(2, vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(BlockCode::new(2, vec![vec![0, 2]]).is_err());
        let one = BlockCode::new(2, vec![vec![1, 0]]).unwrap();
        assert_eq!(one.rate(), 0.0);
    }

    #[test]
    fn random_code_fills_the_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_code(16, 4, &[0.5, 0.5], &mut rng).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c.rate(), 1.0);
        assert!(random_code(17, 4, &[0.5, 0.5], &mut rng).is_err());
        assert!(random_code(2, 3, &[1.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn ml_by_hand() {
        let code = BlockCode::new(2, vec![vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        let ch = bsc(0.1, 3);
        assert_eq!(ml_decode(&[0, 0, 1], &code, &ch).unwrap(), 0);
        assert_eq!(ml_decode(&[0, 1, 1], &code, &ch).unwrap(), 1);
        let flat = dmc_block(&DmcSpec::constant(2, vec![0.5, 0.5]).unwrap(), 3).unwrap();
        assert_eq!(ml_decode(&[1, 1, 1], &code, &flat).unwrap(), 0);
        let sampler_only = BlockChannel::from_sampler(2, 2, 3, |x, _| x.to_vec());
        assert!(matches!(ml_decode(&[0, 0, 0], &code, &sampler_only), Err(Error::SamplerOnly(_))));
    }

    #[test]
    fn tables_match_direct_decoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = dmc_block(&DmcSpec::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.6, 0.3]]).unwrap(), 10).unwrap();
        let code = random_code(20, 10, &[0.5, 0.5], &mut rng).unwrap();
        let decoder = Decoder::new(&code, &ch).unwrap();
        for _ in 0..300 {
            let y = uniform_block(3, 10, &mut rng);
            assert_eq!(decoder.decode(&y), ml_decode(&y, &code, &ch).unwrap());
        }
    }

    #[test]
    fn noiseless_and_repetition_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let code = BlockCode::new(2, vec![vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        let clean = evaluate_code(&code, &bsc(0.0, 3), 1000, &mut rng).unwrap();
        assert_eq!(clean.lambda_max, 0.0);
        let eval = evaluate_code(&code, &bsc(0.1, 3), 20_000, &mut rng).unwrap();
        for p in &eval.per_codeword {
            assert!((p - 0.028).abs() < 0.005, "{p}");
        }
        assert!(evaluate_code(&code, &bsc(0.1, 3), 10, &mut rng).is_err());
    }

    #[test]
    fn useless_channel_is_a_coin() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let code = BlockCode::new(2, vec![vec![0, 0], vec![1, 1]]).unwrap();
        let ch = dmc_block(&DmcSpec::constant(2, vec![0.5, 0.5]).unwrap(), 2).unwrap();
        let eval = evaluate_code(&code, &ch, 4000, &mut rng).unwrap();
        assert!(eval.lambda_max >= 0.5 - 3.0 * eval.lambda_max_se);
    }

    #[test]
    fn source_channel_guards_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let clean = bsc(0.0, 4);
        let r = source_channel_experiment(&[0.5, 0.5], &clean, &SourceScheme::Identity, 2000, &mut rng).unwrap();
        assert_eq!(r.error_rate, 0.0);
        let three = [1.0 / 3.0; 3];
        assert!(source_channel_experiment(&three, &clean, &SourceScheme::Identity, 10, &mut rng).is_err());
    }
}
