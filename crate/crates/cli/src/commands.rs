//! One runner per subcommand.

use std::cell::RefCell;

use molchan::coding::{coding_theorem_experiment, source_channel_experiment, CodingPoint, SourceScheme};
use molchan::config::{ChannelKind, ExperimentConfig, InputPattern};
use molchan::fpt::{crossing_scan, crossing_prob_bound, eventually_decreasing, outlier_bound, predicted_margin};
use molchan::infotheory::{
    adima_scan, dbar_continuity_scan, mutual_information_exact, quantile_capacity, sample_information_density,
    strong_mixing_scan, FiniteDistribution, MixingSpec,
};
use molchan::mc::stream_rng;
use molchan::permchan::Window;
use molchan::receiver::BlockChannel;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::build;
use crate::output::{Artifacts, Table};
use crate::row;
use crate::CliError;

/// Generator stream of each experiment, so that a subcommand run alone
/// and the same experiment inside the suite see the same numbers.
pub mod streams {
    pub const FPT: u64 = 1;
    pub const PERM: u64 = 2;
    pub const ADIMA: u64 = 3;
    pub const DBAR: u64 = 4;
    pub const MIXING: u64 = 5;
    pub const MIXING_INPUT: u64 = 6;
    pub const CAPACITY: u64 = 7;
    pub const CODING: u64 = 8;
    pub const CODING_CHANNELS: u64 = 9;
    pub const SOURCE_CHANNEL: u64 = 10;
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    /// Replaces the subcommand's main trial count.
    pub trials: Option<usize>,
}

impl Context<'_> {
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        stream_rng(self.seed, stream)
    }

    fn summary(&self, command: &str, trials: Value, results: Value) -> Value {
        json!({
            "command": command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "trials": trials,
            "results": results,
        })
    }
}

/// Consecutive points never rise by more than 3 combined standard errors.
pub fn nonincreasing(points: &[(f64, f64)]) -> bool {
    points
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 3.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt() + 1e-12)
}

pub fn fpt_scan(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let s = &cfg.fpt_scan;
    let trials = ctx.trials.unwrap_or(s.trials);
    let model = cfg.fpt_model()?;
    let mut rng = ctx.rng(streams::FPT);

    let mut curve = Table::new("fpt_density", &["t", "density", "tail", "cdf"]);
    let points = s.points.max(2);
    for k in 0..points {
        let t = s.t_max * k as f64 / (points - 1) as f64;
        curve.push(row![t, model.density(t), model.tail(t)?, model.cdf(t)?]);
    }

    let scan = crossing_scan(s.i_max, &cfg.schedule, &model, trials, &mut rng)?;
    let mut crossing = Table::new(
        "fpt_crossing",
        &["i", "p_hat", "se", "bound", "scaled", "scaled_se", "within_bound"],
    );
    let mut violations = 0;
    let (mut scaled, mut slack) = (Vec::new(), Vec::new());
    for c in &scan {
        let bound = crossing_prob_bound(c.i, &cfg.schedule, &model)?;
        let within = c.p_hat <= bound + 3.0 * c.se;
        violations += usize::from(!within);
        let w = (c.i as f64).exp();
        scaled.push(w * c.p_hat);
        slack.push(3.0 * w * c.se);
        crossing.push(row![c.i, c.p_hat, c.se, bound, w * c.p_hat, w * c.se, within]);
    }
    let floor = cfg.schedule.support_floor();
    let decreasing = (floor >= 1.0).then(|| eventually_decreasing(&scaled, &slack));
    let results = json!({
        "mean": model.mean(),
        "variance": model.variance(),
        "shape": model.shape(),
        "support_floor": floor,
        "bound_violations": violations,
        "scaled_eventually_decreasing": decreasing,
    });
    Ok(Artifacts {
        summary: ctx.summary("fpt-scan", json!({ "crossing": trials }), results),
        tables: vec![curve, crossing],
    })
}

pub fn perm_estimate(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let trials = ctx.trials.unwrap_or(cfg.perm.trials);
    let perm = cfg.perm_channel()?;
    let (n, margin) = (cfg.n(), cfg.channel.margin);
    let widest = cfg.perm.margins.iter().copied().max().unwrap_or(0).max(margin);
    let window = Window::new(0, n, margin)?;
    let tape = build::zero_context(n, widest);
    let mut rng = ctx.rng(streams::PERM);

    let gamma = perm.estimate_gamma(&tape, &window, trials, &mut rng)?;
    let mut law = Table::new("perm_gamma", &["ranks", "prob", "se"]);
    for (p, &prob) in &gamma.support {
        let ranks: Vec<String> = p.ranks().iter().map(usize::to_string).collect();
        law.push(row![ranks.join(" "), prob, gamma.standard_error(p)]);
    }

    let mut curve = Table::new("perm_outlier", &["margin", "p_hat", "se", "bound"]);
    let margins = if cfg.perm.margins.is_empty() { vec![margin] } else { cfg.perm.margins.clone() };
    for p in perm.outlier_prob(&tape, &window, &margins, trials, &mut rng)? {
        curve.push(row![p.margin, p.p_hat, p.se, outlier_bound(p.margin, &cfg.schedule, perm.model())?]);
    }
    let results = json!({
        "window": { "start": 0, "len": n, "margin": margin },
        "support_size": gamma.support.len(),
        "outlier_mass": gamma.outlier_mass,
        "total_mass": gamma.total_mass(),
        "low_confidence": gamma.low_confidence,
        "predicted_margin": predicted_margin(cfg.adima.level, &cfg.schedule, perm.model())?,
    });
    Ok(Artifacts {
        summary: ctx.summary("perm-estimate", json!({ "gamma": trials, "outlier": trials }), results),
        tables: vec![law, curve],
    })
}

/// Margin from the outlier bound; receivers alone have no permutation.
fn predicted_window(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    Ok(match cfg.channel.kind {
        ChannelKind::Molecular => predicted_margin(cfg.adima.level, &cfg.schedule, &cfg.fpt_model()?)?,
        ChannelKind::Receiver => 0,
    })
}

pub fn adima(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let a = &cfg.adima;
    let trials = ctx.trials.unwrap_or(a.trials);
    let channel = build::sequence_channel(cfg)?;
    let mut rng = ctx.rng(streams::ADIMA);
    let points = adima_scan(&*channel, *a.n.get_ref(), &a.m_values, a.pairs, trials, &mut rng)?;
    let predicted = predicted_window(cfg)?;
    let mut table = Table::new("adima", &["m", "gap", "se", "exact", "outlier_bound"]);
    for p in &points {
        let bound = match cfg.channel.kind {
            ChannelKind::Molecular => outlier_bound(p.m, &cfg.schedule, &cfg.fpt_model()?)?,
            ChannelKind::Receiver => 0.0,
        };
        table.push(row![p.m, p.gap, p.se, p.exact, bound]);
    }
    let beyond = points
        .iter()
        .filter(|p| p.m >= predicted)
        .map(|p| p.gap)
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
    let results = json!({
        "n": a.n.get_ref(),
        "pairs": a.pairs,
        "level": a.level,
        "predicted_margin": predicted,
        "max_gap_from_predicted": beyond,
        "nonincreasing": nonincreasing(&points.iter().map(|p| (p.gap, p.se)).collect::<Vec<_>>()),
        "exact": points.first().is_some_and(|p| p.exact),
    });
    Ok(Artifacts {
        summary: ctx.summary("adima-scan", json!({ "per_input": trials }), results),
        tables: vec![table],
    })
}

/// Whether the second half of a curve is nonincreasing up to 3 SE.
pub fn tail_nonincreasing(points: &[(f64, f64)]) -> bool {
    nonincreasing(&points[points.len() / 2..])
}

pub fn dbar(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let d = &cfg.dbar;
    let trials = ctx.trials.unwrap_or(d.trials);
    let channel = build::sequence_channel(cfg)?;
    let mut rng = ctx.rng(streams::DBAR);
    let points = dbar_continuity_scan(&*channel, d.n_values.get_ref(), d.pairs, trials, &mut rng)?;
    let mut table = Table::new("dbar", &["n", "dbar", "se", "exact"]);
    for p in &points {
        table.push(row![p.n, p.dbar, p.se, p.exact]);
    }
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.dbar, p.se)).collect();
    let results = json!({
        "pairs": d.pairs,
        "tail_nonincreasing": !curve.is_empty() && tail_nonincreasing(&curve),
        "last": points.last().map(|p| p.dbar),
    });
    Ok(Artifacts {
        summary: ctx.summary("dbar-scan", json!({ "per_input": trials }), results),
        tables: vec![table],
    })
}

/// `2m′ + n + p`: `n` the last position fixed by the unshifted event, `p`
/// the first position of the shifted one.
pub fn mixing_threshold(margin: usize, spec: &MixingSpec) -> i64 {
    let n = spec.second.span(0).map_or(0, |r| r.end - 1);
    let p = spec.first.span(0).map_or(0, |r| r.start);
    2 * margin as i64 + n + p
}

pub fn mixing(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let m = &cfg.mixing;
    let trials = ctx.trials.unwrap_or(m.trials);
    let channel = build::sequence_channel(cfg)?;
    let spec = MixingSpec {
        first: m.first.clone(),
        second: m.second.clone(),
    };
    let margin = match cfg.channel.kind {
        ChannelKind::Molecular => cfg.channel.margin,
        ChannelKind::Receiver => 0,
    };
    let points = run_mixing(&*channel, cfg.alphabet(), m.input, &spec, &m.k_values, trials, ctx)?;
    let threshold = mixing_threshold(margin, &spec);
    let mut table = Table::new("mixing", &["k", "gap", "se", "exact", "beyond_threshold"]);
    let mut within = true;
    for p in &points {
        let beyond = p.k as i64 > threshold;
        if beyond {
            within &= p.gap <= 3.0 * p.se + 1e-12;
        }
        table.push(row![p.k, p.gap, p.se, p.exact, beyond]);
    }
    let results = json!({
        "threshold": threshold,
        "within_3se_beyond_threshold": within,
        "input": m.input,
        "first": m.first,
        "second": m.second,
    });
    Ok(Artifacts {
        summary: ctx.summary("mixing-scan", json!({ "per_k": trials }), results),
        tables: vec![table],
    })
}

pub fn run_mixing(
    channel: &dyn molchan::receiver::SequenceChannel,
    q: usize,
    input: InputPattern,
    spec: &MixingSpec,
    k_values: &[usize],
    trials: usize,
    ctx: &Context,
) -> Result<Vec<molchan::infotheory::MixingPoint>, CliError> {
    let (before, after) = channel.context();
    let k_max = k_values.iter().copied().max().unwrap_or(0) as i64;
    let spans = [spec.first.span(0), spec.first.span(k_max), spec.second.span(0)];
    let lo = spans.iter().flatten().map(|r| r.start).min().unwrap_or(0).min(0);
    let hi = spans.iter().flatten().map(|r| r.end).max().unwrap_or(1).max(1);
    let range = lo - before as i64 - 1..hi + after as i64 + 1;
    let x = build::input_tape(input, q, range, &mut ctx.rng(streams::MIXING_INPUT));
    let mut rng = ctx.rng(streams::MIXING);
    Ok(strong_mixing_scan(channel, &x, spec, k_values, trials, &mut rng)?)
}

fn histogram(values: &[f64], bins: usize) -> Table {
    let mut t = Table::new("capacity_histogram", &["lo", "hi", "count"]);
    if values.is_empty() {
        return t;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        t.push(row![lo, hi, values.len()]);
        return t;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    for (b, c) in counts.into_iter().enumerate() {
        t.push(row![lo + b as f64 * width, lo + (b + 1) as f64 * width, c]);
    }
    t
}

pub fn capacity(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let c = &cfg.capacity;
    let samples = ctx.trials.unwrap_or(c.samples);
    let n = *c.n.get_ref();
    let q = cfg.alphabet();
    let letter = c.source.clone().unwrap_or_else(|| vec![1.0 / q as f64; q]);
    let source = FiniteDistribution::iid(&letter, n)?;
    let mut rng = ctx.rng(streams::CAPACITY);
    let channel = build::block_channel(cfg, n, &mut rng)?;
    let channel = build::decodable(channel, cfg.coding.model_trials, &mut rng)?;
    let exact_mi = if channel.sampler().is_none() || channel.trials().is_some() {
        Some(mutual_information_exact(&source, &channel)?)
    } else {
        None
    };
    let draws = sample_information_density(&source, &channel, samples, &mut rng)?;
    let mut quantiles = Table::new("capacity_quantiles", &["lambda", "c_star"]);
    let mut c_star = serde_json::Map::new();
    for &l in &c.lambdas {
        let v = quantile_capacity(&draws.values, l)?;
        quantiles.push(row![l, v]);
        c_star.insert(l.to_string(), json!(v));
    }
    let mean = draws.values.iter().sum::<f64>() / draws.values.len().max(1) as f64;
    let results = json!({
        "n": n,
        "source": letter,
        "mutual_information": exact_mi,
        "mutual_information_law": law_kind(&channel),
        "mean_information_density": mean,
        "c_star": c_star,
        "excluded": draws.excluded,
    });
    Ok(Artifacts {
        summary: ctx.summary("capacity", json!({ "samples": samples }), results),
        tables: vec![histogram(&draws.values, 40), quantiles],
    })
}

/// How the channel's likelihoods were obtained.
pub fn law_kind(channel: &BlockChannel) -> &'static str {
    match (channel.sampler().is_some(), channel.trials().is_some()) {
        (false, _) => "exact",
        (true, true) => "estimated",
        (true, false) => "fitted_memoryless",
    }
}

/// Per-symbol mutual information of the uniform input at the configured
/// block length: the rate scale of the coding experiment.
pub fn capacity_estimate(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<f64, CliError> {
    let n = cfg.n();
    let q = cfg.alphabet();
    let channel = build::decodable(build::block_channel(cfg, n, rng)?, cfg.coding.model_trials, rng)?;
    Ok(mutual_information_exact(&FiniteDistribution::uniform(q, n)?, &channel)?)
}

pub struct CodingRun {
    pub capacity: f64,
    pub points: Vec<CodingPoint>,
    pub decoder: &'static str,
}

pub fn run_coding(ctx: &Context, capacity: f64, trials: usize) -> Result<CodingRun, CliError> {
    let cfg = ctx.cfg;
    let c = &cfg.coding;
    let channel_rng = RefCell::new(ctx.rng(streams::CODING_CHANNELS));
    let decoder = RefCell::new("exact");
    let channel_at = |n: usize| {
        let mut r = channel_rng.borrow_mut();
        let ch = build::decodable(build::block_channel(cfg, n, &mut *r)?, c.model_trials, &mut *r)?;
        if law_kind(&ch) == "fitted_memoryless" {
            *decoder.borrow_mut() = "fitted_memoryless";
        }
        Ok(ch)
    };
    let mut rng = ctx.rng(streams::CODING);
    let (below, above): (Vec<f64>, Vec<f64>) = c.rate_factors.iter().partition(|&&f| f < 1.0);
    let mut points = Vec::new();
    let n_values = c.n_values.get_ref();
    if !below.is_empty() {
        points.extend(coding_theorem_experiment(channel_at, capacity, &below, n_values, c.codes, trials, &mut rng)?.points);
    }
    if !above.is_empty() {
        points.extend(coding_theorem_experiment(channel_at, capacity, &above, n_values, 1, trials, &mut rng)?.points);
    }
    points.sort_by(|a, b| a.n.cmp(&b.n).then(a.rate_factor.total_cmp(&b.rate_factor)));
    let decoder = *decoder.borrow();
    Ok(CodingRun {
        capacity,
        points,
        decoder,
    })
}

pub fn coding_table(name: &str, points: &[CodingPoint]) -> Table {
    let mut t = Table::new(
        name,
        &["n", "rate_factor", "rate", "codewords", "lambda_max", "lambda_max_se", "average"],
    );
    for p in points {
        t.push(row![p.n, p.rate_factor, p.rate, p.codewords, p.lambda_max, p.lambda_max_se, p.average]);
    }
    t
}

/// For every block length, the lowest rate factor has the smaller `λ̂`.
pub fn ordered_by_rate(points: &[CodingPoint]) -> bool {
    let mut ns: Vec<usize> = points.iter().map(|p| p.n).collect();
    ns.dedup();
    ns.iter().all(|&n| {
        let at: Vec<&CodingPoint> = points.iter().filter(|p| p.n == n).collect();
        let lo = at.iter().min_by(|a, b| a.rate_factor.total_cmp(&b.rate_factor));
        let hi = at.iter().max_by(|a, b| a.rate_factor.total_cmp(&b.rate_factor));
        match (lo, hi) {
            (Some(lo), Some(hi)) => lo.rate_factor == hi.rate_factor || lo.lambda_max < hi.lambda_max,
            _ => true,
        }
    })
}

pub fn code_eval(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let trials = ctx.trials.unwrap_or(cfg.coding.trials);
    let capacity = capacity_estimate(cfg, &mut ctx.rng(streams::CODING_CHANNELS))?;
    let run = run_coding(ctx, capacity, trials)?;
    let results = json!({
        "capacity": run.capacity,
        "decoder": run.decoder,
        "codes_below_capacity": cfg.coding.codes,
        "ordered_by_rate": ordered_by_rate(&run.points),
    });
    Ok(Artifacts {
        summary: ctx.summary("code-eval", json!({ "per_codeword": trials }), results),
        tables: vec![coding_table("coding", &run.points)],
    })
}

pub fn source_channel(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = ctx.cfg;
    let sc = &cfg.source_channel;
    let trials = ctx.trials.unwrap_or(sc.trials);
    let mut rng = ctx.rng(streams::SOURCE_CHANNEL);
    let channel = build::source_channel_block(cfg, &mut rng)?;
    let scheme = match sc.rate {
        Some(rate) => SourceScheme::TypicalSet { rate },
        None => SourceScheme::Identity,
    };
    let r = source_channel_experiment(&sc.letter, &channel, &scheme, trials, &mut rng)?;
    let mut table = Table::new(
        "source_channel",
        &["scheme", "rate", "codewords", "error_rate", "se", "uncovered_mass", "source_entropy"],
    );
    let (name, rate) = match scheme {
        SourceScheme::Identity => ("identity", 1.0),
        SourceScheme::TypicalSet { rate } => ("typical_set", rate),
    };
    table.push(row![name, rate, r.codewords, r.error_rate, r.se, r.uncovered_mass, r.source_entropy]);
    let results = json!({
        "scheme": name,
        "rate": rate,
        "decoder": law_kind(&channel),
        "report": r,
    });
    Ok(Artifacts {
        summary: ctx.summary("source-channel", json!({ "blocks": trials }), results),
        tables: vec![table],
    })
}
