//! First-passage times of Brownian motion with drift, release schedules,
//! and the arrival times of messages released in sequence.
//!
//! A molecule released at time 0 at distance `x` from the receiver, drifting
//! with velocity `v` under diffusion coefficient `ν`, is first detected at a
//! time `D` with density
//!
//! ```text
//! f_D(t) = x / sqrt(4πν) · t^(-3/2) · exp(-(v t - x)² / (4 ν t)),   t > 0
//! ```
//!
//! which is the inverse-Gaussian law with mean `x/v` and shape `x²/(2ν)`.
//! The `i`-th message (1-based) is released after `i - 1` inter-transmission
//! gaps, so `X_1 = D_1` and `X_{i+1} = D_{i+1} + T_1 + .. + T_i`.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::mc;
use crate::quadrature::integrate;
use crate::{Error, Result};

/// Largest tail-integral remainder tolerated beyond the quadrature cutoff.
const TAIL_REMAINDER: f64 = 1e-12;
const TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FptModel {
    diff_coeff: f64,
    distance: f64,
    drift: f64,
}

impl FptModel {
    pub fn new(diff_coeff: f64, distance: f64, drift: f64) -> Result<Self> {
        for (name, value) in [
            ("diff_coeff", diff_coeff),
            ("distance", distance),
            ("drift", drift),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(FptModel {
            diff_coeff,
            distance,
            drift,
        })
    }

    pub fn diff_coeff(&self) -> f64 {
        self.diff_coeff
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Mean first-passage time `x / v`.
    pub fn mean(&self) -> f64 {
        self.distance / self.drift
    }

    /// Inverse-Gaussian shape parameter `x² / (2ν)`.
    pub fn shape(&self) -> f64 {
        self.distance * self.distance / (2.0 * self.diff_coeff)
    }

    pub fn variance(&self) -> f64 {
        self.mean().powi(3) / self.shape()
    }

    fn ln_prefactor(&self) -> f64 {
        self.distance.ln() - 0.5 * (4.0 * std::f64::consts::PI * self.diff_coeff).ln()
    }

    /// Density `f_D(t)`; zero for `t <= 0`.
    pub fn density(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        if t.is_infinite() {
            return 0.0;
        }
        let dev = self.drift * t - self.distance;
        let ln = self.ln_prefactor() - 1.5 * t.ln() - dev * dev / (4.0 * self.diff_coeff * t);
        ln.exp()
    }

    fn mode(&self) -> f64 {
        let mu = self.mean();
        let lambda = self.shape();
        let r = 1.5 * mu / lambda;
        mu * ((1.0 + r * r).sqrt() - r)
    }

    /// Upper bound on `∫_t^∞ f_D`, from `f_D(u) <= C u^(-3/2) e^{xv/2ν} e^{-v²u/4ν}`.
    fn remainder_bound(&self, t: f64) -> f64 {
        let rate = self.drift * self.drift / (4.0 * self.diff_coeff);
        let ln = self.ln_prefactor() - 1.5 * t.ln()
            + self.distance * self.drift / (2.0 * self.diff_coeff)
            - rate * t
            - rate.ln();
        ln.exp()
    }

    /// `P(D >= t)` by adaptive quadrature of the density on `[t, T_cut]`,
    /// where `T_cut` is chosen so the neglected remainder is below `1e-12`.
    pub fn tail(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::pre(format!("tail needs t >= 0, got {t}")));
        }
        if t.is_infinite() {
            return Ok(0.0);
        }
        let mean = self.mean();
        let sd = self.variance().sqrt();
        let mut cut = t.max(mean) + 4.0 * sd + 1.0;
        while self.remainder_bound(cut) > TAIL_REMAINDER {
            cut *= 2.0;
            if !cut.is_finite() {
                return Err(Error::Numerical("tail cutoff overflowed".into()));
            }
        }
        if cut <= t {
            return Ok(0.0);
        }
        let mode = self.mode();
        let mut breaks = vec![0.25 * mode, 0.5 * mode, mode, 2.0 * mode, mean + sd, mean + 4.0 * sd];
        let mut p = 2.0 * (mean + 4.0 * sd);
        while p < cut {
            breaks.push(p);
            p *= 2.0;
        }
        let r = integrate(|u| self.density(u), t, cut, &breaks, TAIL_TOL, 4000)?;
        Ok(r.value.clamp(0.0, 1.0))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        Ok(1.0 - self.tail(t)?)
    }

    /// One exact draw (two-root transformation of a chi-square variate).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mu = self.mean();
        let lambda = self.shape();
        let z: f64 = StandardNormal.sample(rng);
        let y = mu * z * z;
        if y == 0.0 {
            return mu;
        }
        // Smaller root of the quadratic, written without cancellation.
        let root = (4.0 * lambda * y + y * y).sqrt();
        let small = mu * 4.0 * lambda * y / ((root + y) * (root + y));
        let u: f64 = rng.random();
        if u <= mu / (mu + small) {
            small
        } else {
            mu * mu / small
        }
    }
}

/// Law of a single message's propagation delay.
pub trait DelayLaw: Sync {
    fn sample_delay(&self, rng: &mut dyn RngCore) -> f64;
}

impl DelayLaw for FptModel {
    fn sample_delay(&self, rng: &mut dyn RngCore) -> f64 {
        self.sample(rng)
    }
}

/// Law of an inter-transmission gap with support bounded below by `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum GapLaw {
    /// `floor + Exp(rate)`.
    ShiftedExponential { floor: f64, rate: f64 },
    /// Uniform on `[floor, floor + width]`.
    Uniform { floor: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Synchronous { period: f64 },
    IidGaps { gaps: GapLaw },
}

impl Schedule {
    pub fn synchronous(period: f64) -> Result<Self> {
        let s = Schedule::Synchronous { period };
        s.validate()?;
        Ok(s)
    }

    pub fn iid(gaps: GapLaw) -> Result<Self> {
        let s = Schedule::IidGaps { gaps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Schedule::Synchronous { period } if ok(period) => Ok(()),
            Schedule::Synchronous { period } => {
                Err(Error::invalid(format!("period must be positive, got {period}")))
            }
            Schedule::IidGaps {
                gaps: GapLaw::ShiftedExponential { floor, rate },
            } if ok(floor) && ok(rate) => Ok(()),
            Schedule::IidGaps {
                gaps: GapLaw::Uniform { floor, width },
            } if ok(floor) && width >= 0.0 && width.is_finite() => Ok(()),
            Schedule::IidGaps { gaps } => Err(Error::invalid(format!(
                "gap law needs a positive support floor: {gaps:?}"
            ))),
        }
    }

    /// `ε`, the infimum of the gap support.
    pub fn support_floor(&self) -> f64 {
        match *self {
            Schedule::Synchronous { period } => period,
            Schedule::IidGaps {
                gaps: GapLaw::ShiftedExponential { floor, .. },
            }
            | Schedule::IidGaps {
                gaps: GapLaw::Uniform { floor, .. },
            } => floor,
        }
    }

    pub fn mean_gap(&self) -> f64 {
        match *self {
            Schedule::Synchronous { period } => period,
            Schedule::IidGaps {
                gaps: GapLaw::ShiftedExponential { floor, rate },
            } => floor + 1.0 / rate,
            Schedule::IidGaps {
                gaps: GapLaw::Uniform { floor, width },
            } => floor + 0.5 * width,
        }
    }

    pub fn sample_gap(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            Schedule::Synchronous { period } => period,
            Schedule::IidGaps {
                gaps: GapLaw::ShiftedExponential { floor, rate },
            } => floor + Exp::new(rate).expect("validated rate").sample(rng),
            Schedule::IidGaps {
                gaps: GapLaw::Uniform { floor, width },
            } => floor + width * rng.random::<f64>(),
        }
    }
}

/// Arrival times `X_1..X_n` of messages released in sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSequence {
    times: Vec<f64>,
}

impl ArrivalSequence {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::pre("arrival sequence must be nonempty"));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::invalid(format!("arrival time {t} not finite and nonnegative")));
        }
        Ok(ArrivalSequence { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Simulates `X_1..X_n` into `out` (cleared first).
pub fn fill_arrivals<D: DelayLaw + ?Sized>(
    n: usize,
    schedule: &Schedule,
    delay: &D,
    rng: &mut dyn RngCore,
    out: &mut Vec<f64>,
) {
    out.clear();
    let mut release = 0.0;
    for i in 0..n {
        if i > 0 {
            release += schedule.sample_gap(rng);
        }
        out.push(release + delay.sample_delay(rng));
    }
}

pub fn arrival_times<D: DelayLaw + ?Sized>(
    n: usize,
    schedule: &Schedule,
    delay: &D,
    rng: &mut dyn RngCore,
) -> Result<ArrivalSequence> {
    if n == 0 {
        return Err(Error::pre("need at least one message"));
    }
    let mut times = Vec::with_capacity(n);
    fill_arrivals(n, schedule, delay, rng, &mut times);
    Ok(ArrivalSequence { times })
}

/// Upper bound `P(D >= (i-1)ε)` on `P(X_i <= X_1)`.
pub fn crossing_prob_bound(i: usize, schedule: &Schedule, model: &FptModel) -> Result<f64> {
    if i < 2 {
        return Err(Error::pre(format!("crossing bound needs i >= 2, got {i}")));
    }
    let eps = schedule.support_floor();
    if !(eps > 0.0) {
        return Err(Error::pre("schedule support floor must be positive"));
    }
    model.tail((i - 1) as f64 * eps)
}

/// Union bound on `P(X_s <= X_i for some s >= j)`: the sum over `s >= j`
/// of `P(D >= (s - i)ε)`, carried until the terms vanish.
pub fn union_crossing_bound(i: usize, j: usize, schedule: &Schedule, model: &FptModel) -> Result<f64> {
    if j <= i {
        return Err(Error::pre(format!("need j > i, got i = {i}, j = {j}")));
    }
    let eps = schedule.support_floor();
    let mut total = 0.0;
    for s in j.. {
        let term = model.tail((s - i) as f64 * eps)?;
        total += term;
        if term < 1e-16 || s - j > 100_000 {
            break;
        }
    }
    Ok(total.min(1.0))
}

/// Bound on the probability that some output position of a window is fed
/// by a transmission more than `margin` indices outside it:
/// `2 Σ_{d > margin} (d - margin) P(D >= d ε)`.
pub fn outlier_bound(margin: usize, schedule: &Schedule, model: &FptModel) -> Result<f64> {
    let eps = schedule.support_floor();
    if !(eps > 0.0) {
        return Err(Error::pre("schedule support floor must be positive"));
    }
    let mut total = 0.0;
    for d in margin + 1.. {
        let term = (d - margin) as f64 * model.tail(d as f64 * eps)?;
        total += term;
        if term < 1e-18 || d - margin > 100_000 {
            break;
        }
    }
    Ok((2.0 * total).min(1.0))
}

/// Smallest margin whose [`outlier_bound`] is at most `level`.
pub fn predicted_margin(level: f64, schedule: &Schedule, model: &FptModel) -> Result<usize> {
    for m in 0..10_000 {
        if outlier_bound(m, schedule, model)? <= level {
            return Ok(m);
        }
    }
    Err(Error::Numerical("no margin reaches the requested level".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEstimate {
    pub i: usize,
    pub p_hat: f64,
    pub se: f64,
}

/// Monte-Carlo estimates of `P(X_i <= X_1)` for `i = 2..=i_max`.
pub fn crossing_scan<D: DelayLaw + ?Sized, R: Rng + ?Sized>(
    i_max: usize,
    schedule: &Schedule,
    delay: &D,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<CrossingEstimate>> {
    if i_max < 2 || trials == 0 {
        return Err(Error::pre("crossing scan needs i_max >= 2 and trials >= 1"));
    }
    let base = mc::derive_seed(rng);
    let counts = mc::fold_trials(
        base,
        trials,
        || (vec![0usize; i_max + 1], Vec::with_capacity(i_max)),
        |(counts, buf), _, rng| {
            fill_arrivals(i_max, schedule, delay, rng, buf);
            let first = buf[0];
            for i in 2..=i_max {
                if buf[i - 1] <= first {
                    counts[i] += 1;
                }
            }
        },
        |(mut a, buf), (b, _)| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            (a, buf)
        },
    )
    .0;
    Ok((2..=i_max)
        .map(|i| {
            let p = counts[i] as f64 / trials as f64;
            CrossingEstimate {
                i,
                p_hat: p,
                se: mc::bernoulli_se(p, trials),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub i: usize,
    pub p_hat: f64,
    /// `e^i · p_hat`.
    pub scaled: f64,
    pub scaled_se: f64,
}

/// `e^i · P̂(X_i <= X_1)` for `i = 2..=i_max`. Requires `ε >= 1`.
pub fn superexp_decay_scan<D: DelayLaw + ?Sized, R: Rng + ?Sized>(
    i_max: usize,
    schedule: &Schedule,
    delay: &D,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<DecayPoint>> {
    let eps = schedule.support_floor();
    if eps < 1.0 {
        return Err(Error::pre(format!(
            "super-exponential decay is only claimed for support floor >= 1, got {eps}"
        )));
    }
    let scan = crossing_scan(i_max, schedule, delay, trials, rng)?;
    Ok(scan
        .into_iter()
        .map(|c| {
            let w = (c.i as f64).exp();
            DecayPoint {
                i: c.i,
                p_hat: c.p_hat,
                scaled: w * c.p_hat,
                scaled_se: w * c.se,
            }
        })
        .collect())
}

/// Whether a scanned curve is eventually decreasing: from its last peak on,
/// no point rises above an earlier one by more than `slack[k]` (pointwise
/// tolerance, e.g. a few standard errors), and the final value sits below
/// the peak.
pub fn eventually_decreasing(values: &[f64], slack: &[f64]) -> bool {
    if values.len() < 2 {
        return false;
    }
    let peak = values
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v >= values[best] { k } else { best });
    if peak + 1 >= values.len() {
        return false;
    }
    let mut running_min = values[peak];
    for k in peak + 1..values.len() {
        if values[k] > running_min + slack[k] {
            return false;
        }
        running_min = running_min.min(values[k]);
    }
    *values.last().unwrap() < values[peak]
}

/// Monte-Carlo estimate of `P(X_s <= X_i for some s in j..=j+horizon)`.
pub fn union_crossing_estimate<D: DelayLaw + ?Sized, R: Rng + ?Sized>(
    i: usize,
    j: usize,
    horizon: usize,
    schedule: &Schedule,
    delay: &D,
    trials: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if i == 0 || j <= i {
        return Err(Error::pre("need 1 <= i < j"));
    }
    let n = j + horizon;
    let base = mc::derive_seed(rng);
    let hits = mc::fold_trials(
        base,
        trials,
        || (0usize, Vec::with_capacity(n)),
        |(hits, buf), _, rng| {
            fill_arrivals(n, schedule, delay, rng, buf);
            let xi = buf[i - 1];
            if buf[j - 1..n].iter().any(|&xs| xs <= xi) {
                *hits += 1;
            }
        },
        |(a, buf), (b, _)| (a + b, buf),
    )
    .0;
    let p = hits as f64 / trials as f64;
    Ok((p, mc::bernoulli_se(p, trials)))
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// the model CDF, bracketed on a grid of `grid` quantile-spaced points.
///
/// The CDF is only evaluated on the grid, so each sample's CDF value is
/// replaced by the worst end of its grid cell; the result is an upper bound
/// on the exact statistic.
pub fn ks_distance(samples: &mut [f64], model: &FptModel, grid: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::pre("no samples"));
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let lo = samples[0];
    let hi = samples[n - 1];
    let grid = grid.max(2);
    // Grid in sample-quantile space keeps cells narrow where mass is.
    let mut points: Vec<f64> = (0..grid)
        .map(|k| samples[(k * (n - 1)) / (grid - 1)])
        .collect();
    points.push(lo);
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let cdf: Vec<f64> = points.iter().map(|&p| model.cdf(p)).collect::<Result<_>>()?;

    let mut worst: f64 = 0.0;
    let mut cell = 0usize;
    for (k, &s) in samples.iter().enumerate() {
        while cell + 1 < points.len() && points[cell + 1] < s {
            cell += 1;
        }
        let (f_lo, f_hi) = if points[cell] >= s {
            (cdf[cell], cdf[cell])
        } else {
            (cdf[cell], cdf[(cell + 1).min(points.len() - 1)])
        };
        let above = (k + 1) as f64 / n as f64 - f_lo;
        let below = f_hi - k as f64 / n as f64;
        worst = worst.max(above).max(below);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> FptModel {
        FptModel::new(0.25, 1.0, 1.0).unwrap()
    }

    struct Fixed(f64);
    impl DelayLaw for Fixed {
        fn sample_delay(&self, _: &mut dyn RngCore) -> f64 {
            self.0
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(FptModel::new(0.0, 1.0, 1.0).is_err());
        assert!(FptModel::new(1.0, -1.0, 1.0).is_err());
        assert!(FptModel::new(1.0, 1.0, f64::NAN).is_err());
        assert!(Schedule::synchronous(0.0).is_err());
        assert!(Schedule::iid(GapLaw::Uniform { floor: 0.0, width: 1.0 }).is_err());
    }

    #[test]
    fn density_edges() {
        let m = reference();
        assert_eq!(m.density(-1.0), 0.0);
        assert_eq!(m.density(0.0), 0.0);
        assert!(m.density(1e-6) < 1e-300);
        // mpmath, 40 digits: x/sqrt(4πν) at the zero of (vt - x) is 1/sqrt(π).
        assert!((m.density(1.0) - 0.564_189_583_547_756_3).abs() < 1e-14);
    }

    #[test]
    fn tail_goldens() {
        let m = reference();
        assert!((m.tail(0.0).unwrap() - 1.0).abs() < 1e-6);
        assert!(m.tail(1e6).unwrap() < 1e-12);
        // Independent mpmath quadrature at 40 digits.
        assert!((m.tail(2.0).unwrap() - 0.084_953_318_671_071_06).abs() < 1e-8);
        assert!((m.tail(1.0).unwrap() - 0.372_302_161_844_747_1).abs() < 1e-8);
        assert!((m.tail(9.0).unwrap() - 1.492_550_687_332_764e-5).abs() < 1e-8);
        assert!(m.tail(-0.5).is_err());
    }

    #[test]
    fn deterministic_arrivals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Schedule::synchronous(2.5).unwrap();
        let a = arrival_times(5, &s, &Fixed(0.75), &mut rng).unwrap();
        for (i, t) in a.times().iter().enumerate() {
            assert_eq!(*t, 0.75 + i as f64 * 2.5);
        }
        assert!(arrival_times(0, &s, &Fixed(0.75), &mut rng).is_err());
    }

    #[test]
    fn sampler_reproducible_and_positive() {
        let m = reference();
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..1000).map(|_| m.sample(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..1000).map(|_| m.sample(&mut rng)).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| x > 0.0 && x.is_finite()));
    }

    #[test]
    fn crossing_bound_edges() {
        let m = reference();
        let s = Schedule::synchronous(1.0).unwrap();
        assert!(crossing_prob_bound(1, &s, &m).is_err());
        assert_eq!(crossing_prob_bound(2, &s, &m).unwrap(), m.tail(1.0).unwrap());
        let mut prev = 1.0;
        for i in 2..=50 {
            let b = crossing_prob_bound(i, &s, &m).unwrap();
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn superexp_requires_unit_floor() {
        let m = reference();
        let s = Schedule::synchronous(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(superexp_decay_scan(5, &s, &m, 10, &mut rng).is_err());
    }

    #[test]
    fn large_period_never_crosses() {
        let m = reference();
        let s = Schedule::synchronous(10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scan = superexp_decay_scan(8, &s, &m, 20_000, &mut rng).unwrap();
        assert!(scan.iter().skip(1).all(|p| p.scaled == 0.0));
        assert_eq!(scan[0].scaled, 2f64.exp() * scan[0].p_hat);
    }

    #[test]
    fn eventual_decrease_detector() {
        assert!(eventually_decreasing(&[1.0, 2.0, 1.5, 1.0, 0.0], &[0.0; 5]));
        assert!(!eventually_decreasing(&[1.0, 2.0, 3.0], &[0.0; 3]));
        assert!(!eventually_decreasing(&[3.0, 1.0, 2.5], &[0.0; 3]));
        assert!(eventually_decreasing(&[3.0, 1.0, 1.1], &[0.0, 0.0, 0.2]));
    }
}
