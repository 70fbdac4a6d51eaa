//! The acceptance suite: every criterion as a pass/fail check with its
//! supporting tables.

use std::time::Instant;

use molchan::block::Tape;
use molchan::config::{ChannelKind, ExperimentConfig, ReceiverSpec};
use molchan::fpt::{crossing_scan, ks_distance, FptModel, Schedule};
use molchan::infotheory::{
    adima_scan, binary_entropy, dbar_exact, mean_information_density, mutual_information_exact, quantile_capacity,
    sample_information_density, variational_distance, FiniteDistribution,
};
use molchan::mc;
use molchan::permchan::{apply_permutation, order_to_local_permutation, LocalPermutation, Window};
use molchan::fpt::ArrivalSequence;
use molchan::quadrature::integrate;
use molchan::receiver::{
    cascade, dmc_block, finite_memory_channel, DmcSpec, FiniteMemory, FiniteMemoryKernel, Memoryless,
    SequenceCascade,
};
use rand::Rng;
use serde_json::{json, Value};
use std::sync::Arc;

use crate::build;
use crate::commands::{self, streams, Context};
use crate::output::{Artifacts, Table};
use crate::row;
use crate::CliError;

/// Generator streams of the suite's own experiments.
mod suite_streams {
    pub const SAMPLER: u64 = 101;
    pub const SYMMETRY: u64 = 102;
    pub const DEGENERATE: u64 = 103;
    pub const METRIC: u64 = 104;
    pub const QUANTILE: u64 = 105;
    pub const DECAY: u64 = 106;
    pub const MATRIX: u64 = 107;
}

/// Thresholds for the molecular coding check, set from a pilot run of
/// the reference configuration.
/// Six pilot seeds gave 0.23 to 0.29 below capacity at n = 16 and at least
/// 0.66 above capacity.
pub const MOLECULAR_BELOW_MAX: f64 = 0.35;
pub const MOLECULAR_ABOVE_MIN: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub values: Value,
}

pub struct SuiteReport {
    pub checks: Vec<Check>,
    pub artifacts: Artifacts,
}

impl SuiteReport {
    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.id, c.name))
            .collect()
    }
}

struct Suite<'a> {
    ctx: &'a Context<'a>,
    tables: Vec<Table>,
    checks: Vec<Check>,
}

impl Suite<'_> {
    fn keep(&mut self, prefix: &str, artifacts: Artifacts) -> Value {
        for mut t in artifacts.tables {
            t.name = format!("{prefix}_{}", t.name);
            self.tables.push(t);
        }
        artifacts.summary["results"].clone()
    }

    fn record(&mut self, id: u32, name: &'static str, passed: bool, detail: String, values: Value) {
        eprintln!("criterion {id:>2} {} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.checks.push(Check {
            id,
            name,
            passed,
            detail,
            values,
        });
    }

    fn with_cfg<'c>(&self, cfg: &'c ExperimentConfig, trials: Option<usize>) -> Context<'c> {
        Context {
            cfg,
            config_hash: self.ctx.config_hash.clone(),
            seed: self.ctx.seed,
            trials,
        }
    }
}

fn ok_or_fail(v: bool) -> &'static str {
    if v {
        "ok"
    } else {
        "FAILED"
    }
}

const MASS_TRIPLES: [(f64, f64, f64); 10] = [
    (0.25, 1.0, 1.0),
    (0.1, 1.0, 1.0),
    (1.0, 1.0, 1.0),
    (0.25, 2.0, 1.0),
    (0.25, 1.0, 2.0),
    (0.5, 0.5, 1.0),
    (0.05, 1.0, 0.5),
    (2.0, 1.0, 3.0),
    (0.25, 3.0, 0.5),
    (0.01, 1.0, 1.0),
];

/// `∫ f_D` over `[0, mean + 80 sd]` by direct quadrature.
fn total_mass(model: &FptModel) -> molchan::Result<f64> {
    let (mu, sd) = (model.mean(), model.variance().sqrt());
    let breaks: Vec<f64> = [0.01, 0.1, 0.5, 1.0, 2.0]
        .iter()
        .map(|f| f * mu)
        .chain([1.0, 4.0, 16.0].iter().map(|k| mu + k * sd))
        .collect();
    Ok(integrate(|t| model.density(t), 0.0, mu + 80.0 * sd, &breaks, 1e-10, 4000)?.value)
}

fn fpt_correctness(s: &mut Suite) -> Result<(), CliError> {
    let mut mass = Table::new("c1_fpt_mass", &["diff_coeff", "distance", "drift", "integral"]);
    let mut worst: f64 = 0.0;
    for (nu, x, v) in MASS_TRIPLES {
        let m = FptModel::new(nu, x, v)?;
        let total = total_mass(&m)?;
        worst = worst.max((total - 1.0).abs());
        mass.push(row![nu, x, v, total]);
    }
    s.tables.push(mass);

    let model = s.ctx.cfg.fpt_model()?;
    let draws = 1_000_000;
    let base = s.ctx.rng(suite_streams::SAMPLER).random();
    let mut samples = mc::map_trials(base, draws, |_, r| model.sample(r));
    let positive = samples.iter().all(|&t| t > 0.0);
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let ks = ks_distance(&mut samples, &model, 4000)?;
    let mut sampler = Table::new("c1_fpt_sampler", &["draws", "mean", "target_mean", "ks"]);
    sampler.push(row![draws, mean, model.mean(), ks]);
    s.tables.push(sampler);

    let mass_ok = worst <= 1e-6;
    let ks_ok = ks < 0.005;
    let mean_ok = (mean - model.mean()).abs() <= 0.01;
    s.record(
        1,
        "FPT correctness",
        mass_ok && ks_ok && mean_ok && positive,
        format!(
            "max |∫f - 1| = {worst:.2e} {}; KS = {ks:.5} {}; mean = {mean:.5} vs {:.5} {}",
            ok_or_fail(mass_ok),
            ok_or_fail(ks_ok),
            model.mean(),
            ok_or_fail(mean_ok)
        ),
        json!({ "max_mass_error": worst, "ks": ks, "mean": mean, "draws": draws, "all_positive": positive }),
    );
    Ok(())
}

fn crossing_bound(s: &mut Suite) -> Result<(), CliError> {
    let mut cfg = s.ctx.cfg.clone();
    cfg.fpt_scan.i_max = 20;
    cfg.fpt_scan.trials = 100_000;
    let ctx = s.with_cfg(&cfg, None);
    let res = s.keep("c2", commands::fpt_scan(&ctx)?);
    let violations = res["bound_violations"].as_u64().unwrap_or(u64::MAX);

    // The decay claim is for ε = 1.
    let unit = Schedule::synchronous(1.0)?;
    let decreasing = if cfg.schedule == unit {
        res["scaled_eventually_decreasing"].as_bool().unwrap_or(false)
    } else {
        let model = cfg.fpt_model()?;
        let scan = crossing_scan(20, &unit, &model, 100_000, &mut s.ctx.rng(suite_streams::DECAY))?;
        let scaled: Vec<f64> = scan.iter().map(|c| (c.i as f64).exp() * c.p_hat).collect();
        let slack: Vec<f64> = scan.iter().map(|c| 3.0 * (c.i as f64).exp() * c.se).collect();
        molchan::fpt::eventually_decreasing(&scaled, &slack)
    };
    s.record(
        2,
        "crossing-probability bound",
        violations == 0 && decreasing,
        format!(
            "{violations} of 19 estimates above the bound + 3 SE; e^i P̂ eventually decreasing: {decreasing}"
        ),
        json!({ "violations": violations, "eventually_decreasing": decreasing, "trials": 100_000 }),
    );
    Ok(())
}

fn permutation_structure(s: &mut Suite) -> Result<(), CliError> {
    // Worked local version: arrival ranks (5, 4, 3, 1, 2) restricted to {1, 3, 5}.
    let arrivals = ArrivalSequence::new(vec![5.0, 4.0, 3.0, 1.0, 2.0])?;
    let local = order_to_local_permutation(&arrivals, &[1, 3, 5])?;
    let worked = local.ranks() == [3, 2, 1];

    let id = LocalPermutation::identity((0..6).collect())?;
    let block = [1u8, 0, 1, 1, 0, 1];
    let identity_ok = apply_permutation(&block, &id)? == block;

    let model = s.ctx.cfg.fpt_model()?;
    let slow = molchan::permchan::PermChannel::new(model, Schedule::synchronous(1e6)?, 3)?;
    let window = Window::new(0, 4, 2)?;
    let mut rng = s.ctx.rng(suite_streams::DEGENERATE);
    let gamma = slow.estimate_gamma(&Tape::constant(-2..6, 0), &window, 20_000, &mut rng)?;
    let large_t = gamma.support.len() == 1
        && gamma.support.keys().next().is_some_and(|p| p.is_identity())
        && gamma.support.values().next() == Some(&1.0)
        && gamma.outlier_mass == 0.0;

    // Two releases a vanishing time apart overtake each other half the time.
    let burst = Schedule::synchronous(1e-12)?;
    let scan = crossing_scan(2, &burst, &model, 100_000, &mut s.ctx.rng(suite_streams::SYMMETRY))?;
    let swap = scan[0].p_hat;
    let symmetric = (swap - 0.5).abs() <= 0.01;

    s.record(
        3,
        "permutation-channel structure",
        worked && identity_ok && large_t && symmetric,
        format!(
            "local version {:?} {}; identity {}; large-T γ point mass {}; two-release swap {swap:.4} {}",
            local.ranks(),
            ok_or_fail(worked),
            ok_or_fail(identity_ok),
            ok_or_fail(large_t),
            ok_or_fail(symmetric)
        ),
        json!({ "local_ranks": local.ranks(), "large_t_support": gamma.support.len(), "swap": swap }),
    );
    Ok(())
}

fn finite_memory_exemplar() -> molchan::Result<FiniteMemoryKernel> {
    FiniteMemoryKernel::binary_isi(2, &[0.05, 0.2, 0.4])
}

fn adima(s: &mut Suite) -> Result<(), CliError> {
    let res = s.keep("c4", commands::adima(s.ctx)?);
    let nonincreasing = res["nonincreasing"].as_bool().unwrap_or(false);
    let beyond = res["max_gap_from_predicted"].as_f64().unwrap_or(f64::INFINITY);
    let predicted = res["predicted_margin"].as_u64().unwrap_or(0);

    let w = 2;
    let fm = FiniteMemory(finite_memory_exemplar()?);
    let m_values: Vec<usize> = (0..=w + 2).collect();
    let points = adima_scan(&fm, 4, &m_values, 20, 0, &mut s.ctx.rng(streams::ADIMA))?;
    let mut t = Table::new("c4_finite_memory_adima", &["m", "gap", "exact"]);
    for p in &points {
        t.push(row![p.m, p.gap, p.exact]);
    }
    s.tables.push(t);
    let sharp = points.iter().all(|p| p.exact && (p.m >= w) == (p.gap == 0.0));

    s.record(
        4,
        "ADIMA window",
        nonincreasing && beyond < 0.02 && sharp,
        format!(
            "nonincreasing {}; max gap for m >= {predicted} is {beyond:.4} {}; finite memory w = {w} exact zero from m = w {}",
            ok_or_fail(nonincreasing),
            ok_or_fail(beyond < 0.02),
            ok_or_fail(sharp)
        ),
        json!({ "pinned": res, "finite_memory_gaps": points.iter().map(|p| p.gap).collect::<Vec<_>>() }),
    );
    Ok(())
}

fn mixing(s: &mut Suite) -> Result<(), CliError> {
    let res = s.keep("c5", commands::mixing(s.ctx)?);
    let within = res["within_3se_beyond_threshold"].as_bool().unwrap_or(false);
    let threshold = res["threshold"].as_i64().unwrap_or(i64::MAX);

    let cfg = s.ctx.cfg;
    let control = Memoryless(DmcSpec::bsc(0.05)?);
    let spec = molchan::infotheory::MixingSpec {
        first: cfg.mixing.first.clone(),
        second: cfg.mixing.second.clone(),
    };
    let points = commands::run_mixing(
        &control,
        2,
        cfg.mixing.input,
        &spec,
        &cfg.mixing.k_values,
        cfg.mixing.trials,
        s.ctx,
    )?;
    let mut t = Table::new("c5_memoryless_control", &["k", "gap", "exact"]);
    for p in &points {
        t.push(row![p.k, p.gap, p.exact]);
    }
    s.tables.push(t);
    let control_zero = points.iter().filter(|p| p.k as i64 > threshold).all(|p| p.gap == 0.0 && p.exact);

    s.record(
        5,
        "strong mixing",
        within && control_zero,
        format!(
            "gaps within 3 SE of 0 for k > {threshold} {}; memoryless control exactly 0 {}",
            ok_or_fail(within),
            ok_or_fail(control_zero)
        ),
        json!({ "pinned": res, "control_gaps": points.iter().map(|p| p.gap).collect::<Vec<_>>() }),
    );
    Ok(())
}

fn random_law(q: usize, n: usize, rng: &mut impl Rng) -> molchan::Result<FiniteDistribution> {
    let size = q.pow(n as u32);
    let mut w: Vec<f64> = (0..size)
        .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[0] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let drift = 1.0 - w.iter().sum::<f64>();
    w[0] += drift;
    FiniteDistribution::new(q, n, w.into_iter().map(|v| v.max(0.0)).collect())
}

fn dbar_machinery(s: &mut Suite) -> Result<(), CliError> {
    let mut golden = Table::new("c6_dbar_golden", &["case", "n", "value", "expected"]);
    let mut golden_ok = true;
    for n in 1..=4usize {
        let zeros = vec![0u8; n];
        let mut one = zeros.clone();
        one[n - 1] = 1;
        let p = FiniteDistribution::point(2, &zeros)?;
        let q = FiniteDistribution::point(2, &one)?;
        let same = dbar_exact(&p, &p)?.0;
        let delta = dbar_exact(&p, &q)?.0;
        golden_ok &= same == 0.0 && (delta - 1.0 / n as f64).abs() <= 1e-9;
        golden.push(row!["identical", n, same, 0.0]);
        golden.push(row!["one_symbol", n, delta, 1.0 / n as f64]);
    }
    for n in [1, 2, 4] {
        let v = dbar_exact(&FiniteDistribution::bernoulli(0.3, n)?, &FiniteDistribution::bernoulli(0.5, n)?)?.0;
        golden_ok &= (v - 0.2).abs() <= 1e-9;
        golden.push(row!["bernoulli_0.3_0.5", n, v, 0.2]);
    }
    s.tables.push(golden);

    let mut rng = s.ctx.rng(suite_streams::METRIC);
    let (mut sym_err, mut tri_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let a = random_law(2, 3, &mut rng)?;
        let b = random_law(2, 3, &mut rng)?;
        let c = random_law(2, 3, &mut rng)?;
        let ab = dbar_exact(&a, &b)?.0;
        let ba = dbar_exact(&b, &a)?.0;
        let bc = dbar_exact(&b, &c)?.0;
        let ac = dbar_exact(&a, &c)?.0;
        sym_err = sym_err.max((ab - ba).abs());
        tri_err = tri_err.max(ac - ab - bc);
    }
    let metric_ok = sym_err <= 1e-9 && tri_err <= 1e-9;

    let res = s.keep("c6", commands::dbar(s.ctx)?);
    let tail = res["tail_nonincreasing"].as_bool().unwrap_or(false);
    s.record(
        6,
        "d̄ machinery",
        golden_ok && metric_ok && tail,
        format!(
            "golden cases {}; symmetry error {sym_err:.1e}, triangle excess {tri_err:.1e} {}; continuity tail nonincreasing {}",
            ok_or_fail(golden_ok),
            ok_or_fail(metric_ok),
            ok_or_fail(tail)
        ),
        json!({ "symmetry_error": sym_err, "triangle_excess": tri_err, "continuity": res }),
    );
    Ok(())
}

fn iid_counterexample(s: &mut Suite) -> Result<(), CliError> {
    let mut t = Table::new("c7_iid_contrast", &["n", "variational", "dbar"]);
    let (mut v_prev, mut increasing, mut flat) = (f64::NEG_INFINITY, true, true);
    for n in [1, 2, 4, 8] {
        let p = FiniteDistribution::bernoulli(0.3, n)?;
        let q = FiniteDistribution::bernoulli(0.5, n)?;
        let v = variational_distance(&p, &q)?;
        let d = dbar_exact(&p, &q)?.0;
        increasing &= v > v_prev;
        flat &= (d - 0.2).abs() <= 1e-6;
        v_prev = v;
        t.push(row![n, v, d]);
    }
    s.tables.push(t);
    s.record(
        7,
        "i.i.d. variational vs d̄ contrast",
        increasing && flat,
        format!(
            "v_n strictly increasing {}; d̄_n = 0.2 ± 1e-6 {}",
            ok_or_fail(increasing),
            ok_or_fail(flat)
        ),
        json!({ "variational_increasing": increasing, "dbar_flat": flat }),
    );
    Ok(())
}

fn information_identities(s: &mut Suite) -> Result<(), CliError> {
    let mut t = Table::new("c8_information_identity", &["case", "n", "mean_density", "mutual_information", "difference"]);
    let mut worst: f64 = 0.0;
    let bsc = DmcSpec::bsc(0.11)?;
    let fm = FiniteMemoryKernel::binary_isi(1, &[0.1, 0.3])?;
    let pinned = build::block_channel(s.ctx.cfg, 4, &mut s.ctx.rng(suite_streams::MATRIX))?;
    let cases = vec![
        ("bsc_0.11_uniform", FiniteDistribution::uniform(2, 4)?, dmc_block(&bsc, 4)?),
        ("bsc_0.11_bernoulli_0.3", FiniteDistribution::bernoulli(0.3, 3)?, dmc_block(&bsc, 3)?),
        ("finite_memory_uniform", FiniteDistribution::uniform(2, 4)?, finite_memory_channel(&fm, 4, &[1])?),
        ("identity_uniform", FiniteDistribution::uniform(2, 4)?, dmc_block(&DmcSpec::identity(2)?, 4)?),
        ("pinned_uniform", FiniteDistribution::uniform(s.ctx.cfg.alphabet(), 4)?, pinned),
    ];
    for (name, src, ch) in &cases {
        let mean = mean_information_density(src, ch)?;
        let mi = mutual_information_exact(src, ch)?;
        worst = worst.max((mean - mi).abs());
        t.push(row![*name, src.n(), mean, mi, mean - mi]);
    }
    s.tables.push(t);
    let identity_ok = {
        let (src, ch) = (&cases[3].1, &cases[3].2);
        let draws = sample_information_density(src, ch, 1000, &mut s.ctx.rng(suite_streams::QUANTILE))?;
        mutual_information_exact(src, ch)? == 1.0 && quantile_capacity(&draws.values, 0.05)? == 1.0
    };

    let n = 16;
    let src = FiniteDistribution::uniform(2, n)?;
    let ch = dmc_block(&bsc, n)?;
    let draws = sample_information_density(&src, &ch, 10_000, &mut s.ctx.rng(suite_streams::QUANTILE))?;
    let target = 1.0 - binary_entropy(0.11);
    let mut q = Table::new("c8_bsc_quantile_capacity", &["lambda", "c_star", "target"]);
    let mut c_star = serde_json::Map::new();
    for l in [0.1, 0.05, 0.01] {
        let v = quantile_capacity(&draws.values, l)?;
        q.push(row![l, v, target]);
        c_star.insert(l.to_string(), json!(v));
    }
    let mean = draws.values.iter().sum::<f64>() / draws.values.len() as f64;
    q.push(row!["mean", mean, target]);
    s.tables.push(q);
    let at_05 = quantile_capacity(&draws.values, 0.05)?;
    let quantile_ok = (at_05 - target).abs() <= 0.05;

    let identity_ok_str = ok_or_fail(identity_ok);
    s.record(
        8,
        "information identities",
        worst <= 1e-9 && identity_ok && quantile_ok,
        format!(
            "max |E i_n - I| = {worst:.1e} {}; identity MI = C*(0.05) = 1 {identity_ok_str}; BSC(0.11) n=16 C*(0.05) = {at_05:.4} vs {target:.4} ± 0.05 {} (sample mean {mean:.4})",
            ok_or_fail(worst <= 1e-9),
            ok_or_fail(quantile_ok)
        ),
        json!({
            "max_identity_error": worst,
            "identity_ok": worst <= 1e-9,
            "noiseless_ok": identity_ok,
            "quantile_ok": quantile_ok,
            "c_star": c_star,
            "target": target,
            "mean_density": mean,
            "excluded": draws.excluded,
        }),
    );
    Ok(())
}

fn coding(s: &mut Suite) -> Result<(), CliError> {
    let trials = s.ctx.cfg.coding.trials;
    let mut bsc_cfg = s.ctx.cfg.clone();
    bsc_cfg.channel.kind = ChannelKind::Receiver;
    bsc_cfg.receiver = ReceiverSpec::Bsc { crossover: 0.11 };
    bsc_cfg.coding.n_values = toml::Spanned::new(0..0, vec![8, 12, 16]);
    bsc_cfg.coding.rate_factors = vec![0.5, 1.5];
    bsc_cfg.coding.codes = 5;
    let bsc_ctx = s.with_cfg(&bsc_cfg, None);
    let bsc_cap = commands::capacity_estimate(&bsc_cfg, &mut bsc_ctx.rng(streams::CODING_CHANNELS))?;
    let bsc = commands::run_coding(&bsc_ctx, bsc_cap, trials)?;
    s.tables.push(commands::coding_table("c9_coding_bsc", &bsc.points));
    let lam = |pts: &[molchan::coding::CodingPoint], f: f64, n: usize| {
        pts.iter().find(|p| p.rate_factor == f && p.n == n).map_or(f64::NAN, |p| p.lambda_max)
    };
    let bsc_below = lam(&bsc.points, 0.5, 16);
    let bsc_above: Vec<f64> = [8, 12, 16].iter().map(|&n| lam(&bsc.points, 1.5, n)).collect();
    let bsc_ok = bsc_below < 0.05 && bsc_above.iter().all(|&l| l > 0.3);

    let mut mol_cfg = s.ctx.cfg.clone();
    mol_cfg.coding.rate_factors = vec![0.5, 1.5];
    let mol_ctx = s.with_cfg(&mol_cfg, None);
    let mol_cap = commands::capacity_estimate(&mol_cfg, &mut mol_ctx.rng(streams::CODING_CHANNELS))?;
    let mol = commands::run_coding(&mol_ctx, mol_cap, trials)?;
    s.tables.push(commands::coding_table("c9_coding_pinned", &mol.points));
    let mol_n: Vec<usize> = mol_cfg.coding.n_values.get_ref().clone();
    let largest = mol_n.iter().copied().max().unwrap_or(0);
    let mol_below = lam(&mol.points, 0.5, largest);
    let mol_above: Vec<f64> = mol_n.iter().map(|&n| lam(&mol.points, 1.5, n)).collect();
    let ordered = commands::ordered_by_rate(&mol.points);
    let mol_ok = ordered && mol_below < MOLECULAR_BELOW_MAX && mol_above.iter().all(|&l| l > MOLECULAR_ABOVE_MIN);

    s.record(
        9,
        "coding theorem at desk scale",
        bsc_ok && mol_ok,
        format!(
            "BSC(0.11) Ĉ = {bsc_cap:.4}: λ̂(0.5Ĉ, 16) = {bsc_below:.4}, λ̂(1.5Ĉ) = {bsc_above:.3?} {}; pinned Ĉ = {mol_cap:.4} ({} decoder): λ̂(0.5Ĉ, {largest}) = {mol_below:.4}, λ̂(1.5Ĉ) = {mol_above:.3?}, ordered {}",
            ok_or_fail(bsc_ok),
            mol.decoder,
            ok_or_fail(mol_ok)
        ),
        json!({
            "bsc_capacity": bsc_cap,
            "bsc_below_ok": bsc_below < 0.05,
            "bsc_above_ok": bsc_above.iter().all(|&l| l > 0.3),
            "pinned_ok": mol_ok,
            "pinned_capacity": mol_cap,
            "pinned_decoder": mol.decoder,
            "pinned_thresholds": { "below_max": MOLECULAR_BELOW_MAX, "above_min": MOLECULAR_ABOVE_MIN },
        }),
    );
    Ok(())
}

fn cascade_algebra(s: &mut Suite) -> Result<(), CliError> {
    let mut worst: f64 = 0.0;
    for n in [1, 3] {
        let a = dmc_block(&DmcSpec::bsc(0.1)?, n)?;
        let b = dmc_block(&DmcSpec::bsc(0.2)?, n)?;
        let c = cascade(&a, &b)?.matrix()?;
        let target = dmc_block(&DmcSpec::bsc(0.26)?, n)?.matrix()?;
        worst = c.iter().zip(&target).fold(worst, |w, (x, y)| w.max((x - y).abs()));
    }
    let algebra_ok = worst <= 1e-12;

    let (w1, w2) = (1, 2);
    let first = FiniteMemory(FiniteMemoryKernel::binary_isi(w1, &[0.1, 0.3])?);
    let second = FiniteMemory(finite_memory_exemplar()?);
    let chain = SequenceCascade::new(Arc::new(first), Arc::new(second))?;
    let m_values: Vec<usize> = (0..=w1 + w2 + 1).collect();
    let points = adima_scan(&chain, 3, &m_values, 20, 0, &mut s.ctx.rng(streams::ADIMA))?;
    let mut t = Table::new("c10_cascade_adima", &["m", "gap", "exact"]);
    for p in &points {
        t.push(row![p.m, p.gap, p.exact]);
    }
    s.tables.push(t);
    let window_ok = points
        .iter()
        .all(|p| p.exact && (p.m < w1 + w2 || p.gap == 0.0));
    s.record(
        10,
        "cascade algebra",
        algebra_ok && window_ok,
        format!(
            "BSC(0.1)∘BSC(0.2) vs BSC(0.26) max error {worst:.1e} {}; finite-memory cascade (w1 = {w1}, w2 = {w2}) gap 0 from m = {} {}",
            ok_or_fail(algebra_ok),
            w1 + w2,
            ok_or_fail(window_ok)
        ),
        json!({ "max_error": worst, "cascade_gaps": points.iter().map(|p| p.gap).collect::<Vec<_>>() }),
    );
    Ok(())
}

/// Re-runs one Monte-Carlo experiment on one and on three worker threads
/// and compares the rendered outputs byte for byte.
fn determinism(s: &mut Suite) -> Result<(), CliError> {
    let ctx = s.with_cfg(s.ctx.cfg, Some(20_000));
    let render = |threads: usize| -> Result<Vec<Vec<u8>>, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?;
        pool.install(|| {
            let mut out = Vec::new();
            for a in [commands::perm_estimate(&ctx)?, commands::mixing(&ctx)?] {
                for t in &a.tables {
                    out.push(t.to_csv()?);
                }
                out.push(a.summary.to_string().into_bytes());
            }
            Ok(out)
        })
    };
    let same = render(1)? == render(3)?;
    s.record(
        11,
        "determinism",
        same,
        format!("outputs on 1 and 3 worker threads identical {}", ok_or_fail(same)),
        json!({ "identical": same }),
    );
    Ok(())
}

pub fn run_suite(ctx: &Context) -> Result<SuiteReport, CliError> {
    let mut s = Suite {
        ctx,
        tables: Vec::new(),
        checks: Vec::new(),
    };
    type Step = fn(&mut Suite) -> Result<(), CliError>;
    let steps: [(u32, Step); 11] = [
        (1, fpt_correctness),
        (2, crossing_bound),
        (3, permutation_structure),
        (4, adima),
        (5, mixing),
        (6, dbar_machinery),
        (7, iid_counterexample),
        (8, information_identities),
        (9, coding),
        (10, cascade_algebra),
        (11, determinism),
    ];
    for (id, step) in steps {
        let start = Instant::now();
        step(&mut s)?;
        eprintln!("timing {id} {:.2}", start.elapsed().as_secs_f64());
    }
    let criteria: Vec<Value> = s
        .checks
        .iter()
        .map(|c| json!({ "id": c.id, "name": c.name, "passed": c.passed, "detail": c.detail, "values": c.values }))
        .collect();
    let all = s.checks.iter().all(|c| c.passed);
    let summary = json!({
        "command": "paper-suite",
        "config_hash": ctx.config_hash,
        "seed": ctx.seed,
        "trials": {
            "fpt_sampler": 1_000_000,
            "crossing": 100_000,
            "two_release": 100_000,
            "adima_per_input": ctx.cfg.adima.trials,
            "mixing_per_k": ctx.cfg.mixing.trials,
            "dbar_per_input": ctx.cfg.dbar.trials,
            "quantile_samples": 10_000,
            "coding_per_codeword": ctx.cfg.coding.trials,
            "block_matrix": ctx.cfg.channel.matrix_trials,
        },
        "all_passed": all,
        "criteria": criteria,
    });
    Ok(SuiteReport {
        checks: s.checks,
        artifacts: Artifacts {
            tables: s.tables,
            summary,
        },
    })
}
