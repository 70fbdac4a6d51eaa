//! Channels assembled from a configuration.

use std::sync::Arc;

use molchan::block::Tape;
use molchan::coding::fitted_memoryless_model;
use molchan::config::{ChannelKind, ExperimentConfig, InputPattern, Receiver, ReceiverSpec};
use molchan::permchan::PermChannel;
use molchan::receiver::{
    dmc_block, finite_memory_channel, molecular_channel, molecular_sequence_channel, BlockChannel, FiniteMemory,
    Memoryless, SequenceChannel,
};
use molchan::{Result, Symbol};
use rand::{Rng, RngCore};

pub fn receiver_sequence(spec: &ReceiverSpec, alphabet: usize) -> Result<Arc<dyn SequenceChannel>> {
    Ok(match spec.build(alphabet)? {
        Receiver::Memoryless(d) => Arc::new(Memoryless(d)),
        Receiver::FiniteMemory(k) => Arc::new(FiniteMemory(k)),
    })
}

pub fn receiver_block(spec: &ReceiverSpec, alphabet: usize, n: usize) -> Result<BlockChannel> {
    match spec.build(alphabet)? {
        Receiver::Memoryless(d) => dmc_block(&d, n),
        Receiver::FiniteMemory(k) => finite_memory_channel(&k, n, &vec![0; k.memory()]),
    }
}

/// The configured channel acting on sequences.
pub fn sequence_channel(cfg: &ExperimentConfig) -> Result<Arc<dyn SequenceChannel>> {
    let q = cfg.alphabet();
    let receiver = receiver_sequence(&cfg.receiver, q)?;
    Ok(match cfg.channel.kind {
        ChannelKind::Receiver => receiver,
        ChannelKind::Molecular => Arc::new(molecular_sequence_channel(&cfg.perm_channel()?, q, receiver)?),
    })
}

/// Context tape of zeros around the block window `[0, n)`.
pub fn zero_context(n: usize, margin: usize) -> Tape {
    Tape::constant(-(margin as i64)..(n + margin) as i64, 0)
}

fn molecular_block<R: Rng + ?Sized>(
    perm: &PermChannel,
    margin: usize,
    receiver: &ReceiverSpec,
    q: usize,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<BlockChannel> {
    let rx = receiver_block(receiver, q, n)?;
    molecular_channel(perm, margin, &rx, &zero_context(n, margin), trials, rng)
}

/// The configured channel on blocks of length `n`.
pub fn block_channel<R: Rng + ?Sized>(cfg: &ExperimentConfig, n: usize, rng: &mut R) -> Result<BlockChannel> {
    let q = cfg.alphabet();
    match cfg.channel.kind {
        ChannelKind::Receiver => receiver_block(&cfg.receiver, q, n),
        ChannelKind::Molecular => molecular_block(
            &cfg.perm_channel()?,
            cfg.channel.margin,
            &cfg.receiver,
            q,
            n,
            cfg.channel.matrix_trials,
            rng,
        ),
    }
}

/// A channel that can be decoded: the exact law when there is one,
/// otherwise a fitted memoryless law that keeps the original sampler.
pub fn decodable<R: Rng + ?Sized>(channel: BlockChannel, model_trials: usize, rng: &mut R) -> Result<BlockChannel> {
    if channel.is_exact() {
        return Ok(channel);
    }
    let fit = fitted_memoryless_model(&channel, model_trials, rng)?;
    let sampler = channel.sampler().expect("sampler-only channel").clone();
    Ok(dmc_block(&fit, channel.n())?.with_sampler(sampler))
}

/// The source-channel experiment's molecular channel: the configured
/// first-passage law with its own release period and receiver.
pub fn source_channel_block<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<BlockChannel> {
    let sc = &cfg.source_channel;
    let perm = PermChannel::new(
        cfg.fpt_model()?,
        molchan::fpt::Schedule::synchronous(sc.period)?,
        cfg.channel.guard,
    )?;
    let q = sc.letter.len();
    let n = *sc.n.get_ref();
    let ch = molecular_block(&perm, cfg.channel.margin, &sc.receiver, q, n, cfg.channel.matrix_trials, rng)?;
    decodable(ch, cfg.coding.model_trials, rng)
}

/// Input tape covering `range` filled with `pattern`.
pub fn input_tape(pattern: InputPattern, q: usize, range: std::ops::Range<i64>, rng: &mut dyn RngCore) -> Tape {
    let symbols: Vec<Symbol> = range
        .clone()
        .map(|t| match pattern {
            InputPattern::Zeros => 0,
            InputPattern::Alternating => t.rem_euclid(2) as Symbol,
            InputPattern::Random => rng.random_range(0..q) as Symbol,
        })
        .collect();
    Tape::new(range.start, symbols)
}
