//! Experiment configuration (TOML).
//!
//! Every section is optional and falls back to the reference channel:
//! unit distance and drift, diffusion coefficient 0.25, synchronous
//! releases one time unit apart, binary symbols, blocks of four and a
//! BSC(0.05) receiver. Only `seed` is required.
//!
//! ```toml
//! seed = 7
//!
//! [fpt]
//! diff_coeff = 0.25
//! distance = 1.0
//! drift = 1.0
//!
//! [schedule]
//! kind = "synchronous"
//! period = 1.0
//!
//! [receiver]
//! kind = "bsc"
//! crossover = 0.05
//!
//! [channel]
//! kind = "molecular"
//! n = 4
//! margin = 4
//! guard = 10
//! ```

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::block::block_count;
use crate::fpt::{FptModel, Schedule};
use crate::infotheory::Event;
use crate::permchan::{PermChannel, MAX_MATRIX_WINDOW};
use crate::receiver::{DmcSpec, FiniteMemoryKernel, MAX_LAW_BLOCKS};
use crate::block::MAX_DENSE_BLOCKS;
use crate::{Error, Result};

fn sp<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FptSection {
    #[serde(default = "d_diff")]
    pub diff_coeff: f64,
    #[serde(default = "d_one")]
    pub distance: f64,
    #[serde(default = "d_one")]
    pub drift: f64,
}

fn d_diff() -> f64 {
    0.25
}
fn d_one() -> f64 {
    1.0
}

impl Default for FptSection {
    fn default() -> Self {
        FptSection {
            diff_coeff: d_diff(),
            distance: 1.0,
            drift: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReceiverSpec {
    Identity,
    Bsc { crossover: f64 },
    Dmc { rows: Vec<Vec<f64>> },
    /// Binary kernel flipping `x_i` with probability `flip[k]`, `k` the
    /// number of ones among the previous `memory` inputs.
    FiniteMemory { memory: usize, flip: Vec<f64> },
}

impl Default for ReceiverSpec {
    fn default() -> Self {
        ReceiverSpec::Bsc { crossover: 0.05 }
    }
}

/// The receiver as a memoryless or finite-memory law.
#[derive(Debug, Clone, PartialEq)]
pub enum Receiver {
    Memoryless(DmcSpec),
    FiniteMemory(FiniteMemoryKernel),
}

impl ReceiverSpec {
    pub fn build(&self, alphabet: usize) -> Result<Receiver> {
        Ok(match self {
            ReceiverSpec::Identity => Receiver::Memoryless(DmcSpec::identity(alphabet)?),
            ReceiverSpec::Bsc { crossover } => Receiver::Memoryless(DmcSpec::bsc(*crossover)?),
            ReceiverSpec::Dmc { rows } => Receiver::Memoryless(DmcSpec::new(rows.clone())?),
            ReceiverSpec::FiniteMemory { memory, flip } => {
                Receiver::FiniteMemory(FiniteMemoryKernel::binary_isi(*memory, flip)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// Arrival-order permutation followed by the receiver.
    Molecular,
    /// The receiver alone.
    Receiver,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "d_kind")]
    pub kind: ChannelKind,
    #[serde(default = "d_alphabet")]
    pub alphabet: Spanned<usize>,
    #[serde(default = "d_n")]
    pub n: Spanned<usize>,
    /// Outlier margin `m′` of the block window.
    #[serde(default = "d_margin")]
    pub margin: usize,
    /// Extra transmissions simulated beyond each side of a window.
    #[serde(default = "d_guard")]
    pub guard: usize,
    /// Simulated orders behind an estimated block matrix.
    #[serde(default = "d_matrix_trials")]
    pub matrix_trials: usize,
}

fn d_kind() -> ChannelKind {
    ChannelKind::Molecular
}
fn d_alphabet() -> Spanned<usize> {
    sp(2)
}
fn d_n() -> Spanned<usize> {
    sp(4)
}
fn d_margin() -> usize {
    4
}
fn d_guard() -> usize {
    10
}
fn d_matrix_trials() -> usize {
    100_000
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            kind: d_kind(),
            alphabet: d_alphabet(),
            n: d_n(),
            margin: d_margin(),
            guard: d_guard(),
            matrix_trials: d_matrix_trials(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FptScanSection {
    pub t_max: f64,
    pub points: usize,
    /// Largest transmission index in the crossing scan.
    pub i_max: usize,
    pub trials: usize,
}

impl Default for FptScanSection {
    fn default() -> Self {
        FptScanSection {
            t_max: 8.0,
            points: 81,
            i_max: 20,
            trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PermSection {
    pub margins: Vec<usize>,
    pub trials: usize,
}

impl Default for PermSection {
    fn default() -> Self {
        PermSection {
            margins: (0..=6).collect(),
            trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdimaSection {
    #[serde(default = "d_n")]
    pub n: Spanned<usize>,
    #[serde(default = "d_m_values")]
    pub m_values: Vec<usize>,
    #[serde(default = "d_pairs")]
    pub pairs: usize,
    #[serde(default = "d_adima_trials")]
    pub trials: usize,
    /// Outlier-bound level that sets the predicted window.
    #[serde(default = "d_level")]
    pub level: f64,
}

fn d_m_values() -> Vec<usize> {
    (0..=7).collect()
}
fn d_pairs() -> usize {
    20
}
fn d_adima_trials() -> usize {
    4000
}
fn d_level() -> f64 {
    0.02
}

impl Default for AdimaSection {
    fn default() -> Self {
        AdimaSection {
            n: d_n(),
            m_values: d_m_values(),
            pairs: d_pairs(),
            trials: d_adima_trials(),
            level: d_level(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbarSection {
    #[serde(default = "d_dbar_n")]
    pub n_values: Spanned<Vec<usize>>,
    #[serde(default = "d_dbar_pairs")]
    pub pairs: usize,
    #[serde(default = "d_dbar_trials")]
    pub trials: usize,
}

fn d_dbar_n() -> Spanned<Vec<usize>> {
    sp(vec![2, 4, 6, 8, 10, 12])
}
fn d_dbar_pairs() -> usize {
    3
}
fn d_dbar_trials() -> usize {
    2000
}

impl Default for DbarSection {
    fn default() -> Self {
        DbarSection {
            n_values: d_dbar_n(),
            pairs: d_dbar_pairs(),
            trials: d_dbar_trials(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputPattern {
    Zeros,
    Alternating,
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    /// Cylinder shifted by `k`.
    #[serde(default = "d_first")]
    pub first: Event,
    #[serde(default = "d_second")]
    pub second: Event,
    #[serde(default = "d_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default = "d_mixing_trials")]
    pub trials: usize,
    #[serde(default = "d_input")]
    pub input: InputPattern,
}

fn d_first() -> Event {
    Event::cylinder(0, vec![0, 1])
}
fn d_second() -> Event {
    Event::cylinder(0, vec![1, 0])
}
fn d_k_values() -> Vec<usize> {
    (0..=16).collect()
}
fn d_mixing_trials() -> usize {
    40_000
}
fn d_input() -> InputPattern {
    InputPattern::Random
}

impl Default for MixingSection {
    fn default() -> Self {
        MixingSection {
            first: d_first(),
            second: d_second(),
            k_values: d_k_values(),
            trials: d_mixing_trials(),
            input: d_input(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    #[serde(default = "d_n")]
    pub n: Spanned<usize>,
    /// Letter law of the i.i.d. input; uniform when absent.
    #[serde(default)]
    pub source: Option<Vec<f64>>,
    #[serde(default = "d_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

fn d_lambdas() -> Vec<f64> {
    vec![0.1, 0.05, 0.01]
}
fn d_samples() -> usize {
    10_000
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection {
            n: d_n(),
            source: None,
            lambdas: d_lambdas(),
            samples: d_samples(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodingSection {
    #[serde(default = "d_coding_n")]
    pub n_values: Spanned<Vec<usize>>,
    #[serde(default = "d_factors")]
    pub rate_factors: Vec<f64>,
    /// Random codes drawn per point below capacity; one above.
    #[serde(default = "d_codes")]
    pub codes: usize,
    #[serde(default = "d_code_trials")]
    pub trials: usize,
    /// Simulated blocks behind a fitted decoding model.
    #[serde(default = "d_model_trials")]
    pub model_trials: usize,
}

fn d_coding_n() -> Spanned<Vec<usize>> {
    sp(vec![8, 12, 16])
}
fn d_factors() -> Vec<f64> {
    vec![0.5, 1.5]
}
fn d_codes() -> usize {
    5
}
fn d_code_trials() -> usize {
    1000
}
fn d_model_trials() -> usize {
    20_000
}

impl Default for CodingSection {
    fn default() -> Self {
        CodingSection {
            n_values: d_coding_n(),
            rate_factors: d_factors(),
            codes: d_codes(),
            trials: d_code_trials(),
            model_trials: d_model_trials(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceChannelSection {
    #[serde(default = "d_sc_letter")]
    pub letter: Vec<f64>,
    #[serde(default = "d_sc_n")]
    pub n: Spanned<usize>,
    /// Source-code rate; the identity scheme when absent.
    #[serde(default = "d_sc_rate")]
    pub rate: Option<f64>,
    #[serde(default = "d_sc_trials")]
    pub trials: usize,
    #[serde(default = "d_sc_period")]
    pub period: f64,
    #[serde(default = "d_sc_receiver")]
    pub receiver: ReceiverSpec,
}

fn d_sc_letter() -> Vec<f64> {
    vec![0.89, 0.11]
}
fn d_sc_n() -> Spanned<usize> {
    sp(16)
}
fn d_sc_rate() -> Option<f64> {
    Some(0.75)
}
fn d_sc_trials() -> usize {
    20_000
}
fn d_sc_period() -> f64 {
    4.0
}
fn d_sc_receiver() -> ReceiverSpec {
    ReceiverSpec::Bsc { crossover: 0.005 }
}

impl Default for SourceChannelSection {
    fn default() -> Self {
        SourceChannelSection {
            letter: d_sc_letter(),
            n: d_sc_n(),
            rate: d_sc_rate(),
            trials: d_sc_trials(),
            period: d_sc_period(),
            receiver: d_sc_receiver(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub fpt: FptSection,
    #[serde(default = "d_schedule")]
    pub schedule: Schedule,
    #[serde(default)]
    pub receiver: ReceiverSpec,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub fpt_scan: FptScanSection,
    #[serde(default)]
    pub perm: PermSection,
    #[serde(default)]
    pub adima: AdimaSection,
    #[serde(default)]
    pub dbar: DbarSection,
    #[serde(default)]
    pub mixing: MixingSection,
    #[serde(default)]
    pub capacity: CapacitySection,
    #[serde(default)]
    pub coding: CodingSection,
    #[serde(default)]
    pub source_channel: SourceChannelSection,
}

fn d_schedule() -> Schedule {
    Schedule::Synchronous { period: 1.0 }
}

/// 1-based line and column of byte `offset` in `text`.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn at(&self, span: &Range<usize>) -> (usize, usize) {
        line_column(self.text, span.start)
    }

    fn config(&self, span: &Range<usize>, message: impl Into<String>) -> Error {
        let (line, column) = self.at(span);
        Error::Config {
            line,
            column,
            message: message.into(),
        }
    }

    fn guard(&self, span: &Range<usize>, guard: &'static str, limit: usize, actual: usize) -> Error {
        let (line, column) = self.at(span);
        Error::ConfigGuard {
            line,
            column,
            guard,
            limit,
            actual,
        }
    }

    fn blocks(&self, q: usize, n: &Spanned<usize>, limit: usize, guard: &'static str) -> Result<()> {
        match block_count(q, *n.get_ref()) {
            Some(c) if c <= limit => Ok(()),
            other => Err(self.guard(&n.span(), guard, limit, other.unwrap_or(usize::MAX))),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a configuration; errors carry the line and
    /// column of the offending value.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
            Error::Config {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<()> {
        let loc = Locator { text };
        let q = *self.channel.alphabet.get_ref();
        let q_span = self.channel.alphabet.span();
        if !(2..=256).contains(&q) {
            return Err(loc.config(&q_span, format!("alphabet must have 2 to 256 letters, got {q}")));
        }
        let at_top = 0..0;
        self.fpt_model().map_err(|e| loc.config(&at_top, format!("[fpt]: {e}")))?;
        self.schedule
            .validate()
            .map_err(|e| loc.config(&at_top, format!("[schedule]: {e}")))?;
        let receiver = self
            .receiver
            .build(q)
            .map_err(|e| loc.config(&at_top, format!("[receiver]: {e}")))?;
        let (r_in, r_out) = match &receiver {
            Receiver::Memoryless(d) => (d.inputs(), d.outputs()),
            Receiver::FiniteMemory(k) => (k.inputs(), k.outputs()),
        };
        if r_in != q {
            return Err(loc.config(&q_span, format!("receiver reads {r_in} letters, channel alphabet is {q}")));
        }
        if self.channel.kind == ChannelKind::Molecular && r_out != q {
            return Err(loc.config(&q_span, format!("receiver emits {r_out} letters, channel alphabet is {q}")));
        }

        let n = &self.channel.n;
        if *n.get_ref() == 0 {
            return Err(loc.config(&n.span(), "block length must be at least 1"));
        }
        if self.channel.kind == ChannelKind::Molecular && *n.get_ref() > MAX_MATRIX_WINDOW {
            return Err(loc.guard(&n.span(), "window length", MAX_MATRIX_WINDOW, *n.get_ref()));
        }
        loc.blocks(q, n, MAX_DENSE_BLOCKS, "matrix rows")?;
        if self.channel.matrix_trials == 0 {
            return Err(loc.config(&at_top, "[channel] matrix_trials must be at least 1"));
        }

        for (what, n) in [("adima", &self.adima.n), ("capacity", &self.capacity.n)] {
            if *n.get_ref() == 0 {
                return Err(loc.config(&n.span(), format!("[{what}] block length must be at least 1")));
            }
            loc.blocks(q, n, MAX_LAW_BLOCKS, "output blocks")?;
        }
        for list in [&self.dbar.n_values, &self.coding.n_values] {
            for &n in list.get_ref() {
                if n == 0 {
                    return Err(loc.config(&list.span(), "block lengths must be at least 1"));
                }
                loc.blocks(q, &Spanned::new(list.span(), n), MAX_LAW_BLOCKS, "output blocks")?;
            }
        }
        if self.adima.pairs < crate::infotheory::MIN_ADIMA_PAIRS {
            return Err(loc.config(
                &at_top,
                format!("[adima] pairs must be at least {}", crate::infotheory::MIN_ADIMA_PAIRS),
            ));
        }
        if !(self.adima.level > 0.0 && self.adima.level < 1.0) {
            return Err(loc.config(&at_top, "[adima] level must lie in (0, 1)"));
        }
        if self.capacity.lambdas.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(loc.config(&at_top, "[capacity] every λ must lie in (0, 1)"));
        }
        if let Some(src) = &self.capacity.source {
            if src.len() != q {
                return Err(loc.config(&at_top, format!("[capacity] source has {} letters, alphabet is {q}", src.len())));
            }
        }
        for e in [&self.mixing.first, &self.mixing.second] {
            if let Event::Cylinder { symbols, .. } = e {
                if symbols.len() > 3 {
                    return Err(loc.config(&at_top, "[mixing] cylinders may fix at most 3 positions"));
                }
                if symbols.iter().any(|&s| s as usize >= q) {
                    return Err(loc.config(&at_top, "[mixing] cylinder symbol outside the alphabet"));
                }
            }
        }
        if self.coding.trials < crate::coding::MIN_TRIALS_PER_CODEWORD {
            return Err(loc.config(
                &at_top,
                format!("[coding] trials must be at least {}", crate::coding::MIN_TRIALS_PER_CODEWORD),
            ));
        }
        if !(self.source_channel.period > 0.0) {
            return Err(loc.config(&at_top, "[source_channel] period must be positive"));
        }
        // The source-channel experiment runs on the letter's own alphabet.
        let sc = &self.source_channel;
        let sq = sc.letter.len();
        if !(2..=256).contains(&sq)
            || sc.letter.iter().any(|p| !(*p >= 0.0))
            || (sc.letter.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(loc.config(&at_top, "[source_channel] letter must be a distribution on 2 to 256 symbols"));
        }
        if *sc.n.get_ref() == 0 {
            return Err(loc.config(&sc.n.span(), "[source_channel] block length must be at least 1"));
        }
        loc.blocks(sq, &sc.n, MAX_LAW_BLOCKS, "output blocks")?;
        sc.receiver
            .build(sq)
            .map_err(|e| loc.config(&at_top, format!("[source_channel.receiver]: {e}")))?;
        Ok(())
    }

    pub fn fpt_model(&self) -> Result<FptModel> {
        FptModel::new(self.fpt.diff_coeff, self.fpt.distance, self.fpt.drift)
    }

    pub fn perm_channel(&self) -> Result<PermChannel> {
        PermChannel::new(self.fpt_model()?, self.schedule, self.channel.guard)
    }

    pub fn alphabet(&self) -> usize {
        *self.channel.alphabet.get_ref()
    }

    pub fn n(&self) -> usize {
        *self.channel.n.get_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_only_a_seed() {
        let cfg = ExperimentConfig::parse("seed = 3\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.n(), 4);
        assert_eq!(cfg.receiver, ReceiverSpec::Bsc { crossover: 0.05 });
    }

    #[test]
    fn missing_seed_is_an_error() {
        assert!(matches!(ExperimentConfig::parse("[fpt]\ndrift = 2.0\n"), Err(Error::Config { .. })));
    }

    #[test]
    fn diagnostics_point_at_the_value() {
        let text = "seed = 1\n[channel]\nn = \"four\"\n";
        match ExperimentConfig::parse(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "seed = 1\n\n[fpt]\ndrfit = 1.0\n";
        match ExperimentConfig::parse(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn guards_name_the_limit_and_line() {
        let text = "seed = 1\n[channel]\nn = 7\n";
        match ExperimentConfig::parse(text) {
            Err(Error::ConfigGuard { line, column, guard, .. }) => {
                assert_eq!((line, column), (3, 5));
                assert_eq!(guard, "window length");
            }
            other => panic!("{other:?}"),
        }
        let text = "seed = 1\n[channel]\nkind = \"receiver\"\nn = 13\n";
        assert!(matches!(
            ExperimentConfig::parse(text),
            Err(Error::ConfigGuard { guard: "matrix rows", line: 4, .. })
        ));
    }

    #[test]
    fn tagged_sections() {
        let text = r#"
seed = 9
[schedule]
kind = "iid_gaps"
gaps = { law = "uniform", floor = 1.0, width = 0.5 }
[receiver]
kind = "finite_memory"
memory = 1
flip = [0.1, 0.3]
[mixing]
first = { kind = "cylinder", start = 0, symbols = [1] }
second = { kind = "full" }
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.schedule.support_floor(), 1.0);
        assert_eq!(cfg.mixing.second, Event::Full);
    }

    #[test]
    fn line_columns() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }
}
