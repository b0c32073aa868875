//! Monte Carlo for Galton–Watson populations, branching random walk maxima
//! and independent-walk maxima.
//!
//! Replicate `i` draws from its own ChaCha8 stream `(seed, i)`, so results do
//! not depend on how replicates are scheduled across threads. Per-replicate
//! outcomes are collected in index order before any floating-point
//! aggregation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Normal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use crate::error::{Assumption, Error, Result};
use crate::exact::Direction;
use crate::model::{LatticeStep, Model, OffspringLaw, StepLaw};
use crate::rates::solve_tilt;

/// Default cap on particle-steps per replicate.
pub const DEFAULT_BUDGET: u64 = 10_000_000;
pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const MIN_REPLICATES: u64 = 100;

/// How branching random walk replicates are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BrwSampler {
    /// One position per particle; works for every step law.
    #[default]
    Particles,
    /// Particle counts per lattice site, moved by multinomial draws. Same law
    /// as `Particles`, with cost independent of the population size.
    Occupation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Work units (particle-steps, or site updates for the occupation
    /// sampler) a single replicate may use before it is censored.
    pub budget: u64,
    pub confidence: f64,
    pub sampler: BrwSampler,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            budget: DEFAULT_BUDGET,
            confidence: DEFAULT_CONFIDENCE,
            sampler: BrwSampler::Particles,
        }
    }
}

/// Point estimate with a confidence interval and replicate accounting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateCI {
    pub point: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    /// Replicates requested.
    pub replicates: u64,
    /// Replicates aborted by the population budget.
    pub censored: u64,
    /// Replicates entering the estimate (after censoring and conditioning).
    pub used: u64,
    /// Whether the estimate is conditioned on `{Z_n > 0}`.
    pub conditioned: bool,
    pub seed: u64,
}

impl EstimateCI {
    pub fn completed(&self) -> u64 {
        self.replicates - self.censored
    }

    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.point
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// State of one replicate at generation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrwSnapshot {
    pub n: usize,
    pub population: u64,
    /// `None` when the population is extinct (`M_n = -inf`).
    pub max_position: Option<f64>,
    /// `Z_n / m^n`.
    pub martingale_w: f64,
}

/// Marker for a replicate aborted by the population budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Censored;

/// Independent stream for replicate `replicate` under root `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn normal_quantile(confidence: f64) -> f64 {
    NormalDist::standard().inverse_cdf(0.5 + 0.5 * confidence)
}

fn check_replicates(replicates: u64) -> Result<()> {
    if replicates < MIN_REPLICATES {
        Err(Error::domain(format!(
            "need at least {MIN_REPLICATES} replicates, got {replicates}"
        )))
    } else {
        Ok(())
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = normal_quantile(confidence);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (low.min(p), high.max(p))
}

fn proportion_estimate(
    successes: u64,
    trials: u64,
    replicates: u64,
    censored: u64,
    conditioned: bool,
    seed: u64,
    confidence: f64,
) -> EstimateCI {
    let p = successes as f64 / trials as f64;
    let (ci_low, ci_high) = wilson_interval(successes, trials, confidence);
    EstimateCI {
        point: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        ci_low,
        ci_high,
        confidence,
        replicates,
        censored,
        used: trials,
        conditioned,
        seed,
    }
}

/// Pairwise summation, fixed by the input order.
fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_estimate(
    samples: &[f64],
    replicates: u64,
    censored: u64,
    conditioned: bool,
    seed: u64,
    confidence: f64,
) -> Result<EstimateCI> {
    if samples.len() < 2 {
        return Err(Error::NoReplicates(format!(
            "{} usable replicates out of {replicates} ({censored} censored)",
            samples.len()
        )));
    }
    let k = samples.len() as f64;
    let mean = pairwise_sum(samples) / k;
    let squares: Vec<f64> = samples.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&squares) / (k - 1.0);
    let stderr = (var / k).sqrt();
    let z = normal_quantile(confidence);
    Ok(EstimateCI {
        point: mean,
        stderr,
        ci_low: mean - z * stderr,
        ci_high: mean + z * stderr,
        confidence,
        replicates,
        censored,
        used: samples.len() as u64,
        conditioned,
        seed,
    })
}

/// Draws from a finite law by inversion over its cumulative weights.
#[derive(Debug, Clone)]
struct OffspringSampler {
    index: WeightedIndex<f64>,
}

impl OffspringSampler {
    fn new(law: &OffspringLaw) -> Self {
        OffspringSampler {
            index: WeightedIndex::new(law.weights()).expect("validated weights"),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// Sum of `count` i.i.d. draws from `weights` (indexed by value), drawn as
/// multinomial counts through successive binomials.
fn multinomial_sum<R: Rng>(
    weights: &[f64],
    values: impl Fn(usize) -> i128,
    count: u64,
    rng: &mut R,
) -> i128 {
    let mut remaining = count;
    let mut mass_left = 1.0;
    let mut total: i128 = 0;
    for (k, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if w <= 0.0 {
            continue;
        }
        let drawn = if k + 1 == weights.len() || w >= mass_left {
            remaining
        } else {
            let p = (w / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, p).expect("valid binomial").sample(rng)
        };
        total += values(k) * drawn as i128;
        remaining -= drawn;
        mass_left -= w;
    }
    total
}

#[derive(Debug, Clone)]
enum StepSampler {
    Lattice { offsets: Vec<i64>, index: WeightedIndex<f64> },
    Gaussian(Normal<f64>),
}

impl StepSampler {
    fn new(step: &StepLaw) -> Self {
        match step {
            StepLaw::Lattice(l) => StepSampler::Lattice {
                offsets: l.offsets().to_vec(),
                index: WeightedIndex::new(l.probs()).expect("validated probabilities"),
            },
            StepLaw::Gaussian(g) => {
                StepSampler::Gaussian(Normal::new(g.mean(), g.sigma()).expect("validated sigma"))
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            StepSampler::Lattice { offsets, index } => offsets[index.sample(rng)] as f64,
            StepSampler::Gaussian(n) => n.sample(rng),
        }
    }
}

/// Endpoint of an `n`-step walk.
fn walk_endpoint<R: Rng>(step: &StepLaw, n: usize, rng: &mut R) -> f64 {
    match step {
        StepLaw::Lattice(l) => lattice_endpoint(l, n, rng) as f64,
        StepLaw::Gaussian(g) => {
            let sd = g.sigma() * (n as f64).sqrt();
            g.mean() * n as f64 + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
        }
    }
}

fn lattice_endpoint<R: Rng>(l: &LatticeStep, n: usize, rng: &mut R) -> i128 {
    let offsets = l.offsets();
    multinomial_sum(l.probs(), |j| offsets[j] as i128, n as u64, rng)
}

/// One branching random walk run to generation `n`, tracking only the
/// current generation's positions.
pub fn sample_brw<R: Rng>(
    model: &Model,
    n: usize,
    budget: u64,
    rng: &mut R,
) -> std::result::Result<BrwSnapshot, Censored> {
    let offspring = OffspringSampler::new(&model.offspring);
    let step = StepSampler::new(&model.step);
    run_brw(model, &offspring, &step, n, budget, rng)
}

fn run_brw<R: Rng>(
    model: &Model,
    offspring: &OffspringSampler,
    step: &StepSampler,
    n: usize,
    budget: u64,
    rng: &mut R,
) -> std::result::Result<BrwSnapshot, Censored> {
    let mut positions = vec![0.0f64];
    let mut next = Vec::new();
    let mut used: u64 = 0;
    for _ in 0..n {
        if positions.is_empty() {
            break;
        }
        next.clear();
        for &pos in &positions {
            let k = offspring.sample(rng);
            used += k as u64;
            if used > budget {
                return Err(Censored);
            }
            for _ in 0..k {
                next.push(pos + step.sample(rng));
            }
        }
        std::mem::swap(&mut positions, &mut next);
    }
    let max_position = positions.iter().copied().reduce(f64::max);
    Ok(snapshot(model, n, positions.len() as u64, max_position))
}

/// One branching random walk run on a lattice, tracking how many particles
/// sit at each site. Censored when the site updates exceed `budget` or a
/// count overflows `u64`.
pub fn sample_brw_occupation<R: Rng>(
    model: &Model,
    n: usize,
    budget: u64,
    rng: &mut R,
) -> Result<std::result::Result<BrwSnapshot, Censored>> {
    let step = model.step.as_lattice()?;
    Ok(run_occupation(model, step, n, budget, rng))
}

fn run_occupation<R: Rng>(
    model: &Model,
    step: &LatticeStep,
    n: usize,
    budget: u64,
    rng: &mut R,
) -> std::result::Result<BrwSnapshot, Censored> {
    let (min, max) = (step.min_offset(), step.max_offset());
    let span = (max - min) as usize;
    // counts[i] is the occupation of site lo + i
    let mut lo: i64 = 0;
    let mut counts: Vec<u64> = vec![1];
    let mut used: u64 = 0;
    for _ in 0..n {
        let Some(first) = counts.iter().position(|&c| c > 0) else {
            break;
        };
        let last = counts.iter().rposition(|&c| c > 0).expect("nonempty");
        let base = lo + first as i64;
        let mut next = vec![0u64; last - first + span + 1];
        for (i, &c) in counts[first..=last].iter().enumerate() {
            if c == 0 {
                continue;
            }
            used += 1;
            if used > budget {
                return Err(Censored);
            }
            let children = multinomial_sum(model.offspring.weights(), |k| k as i128, c, rng);
            let mut remaining = u64::try_from(children).map_err(|_| Censored)?;
            let mut mass_left = 1.0;
            let moves = step.offsets().iter().zip(step.probs()).enumerate();
            let last_move = step.offsets().len() - 1;
            for (j, (&o, &p)) in moves {
                if remaining == 0 {
                    break;
                }
                let drawn = if j == last_move || p >= mass_left {
                    remaining
                } else {
                    let q = (p / mass_left).clamp(0.0, 1.0);
                    Binomial::new(remaining, q).expect("valid binomial").sample(rng)
                };
                let slot = &mut next[i + (o - min) as usize];
                *slot = slot.checked_add(drawn).ok_or(Censored)?;
                remaining -= drawn;
                mass_left -= p;
            }
        }
        lo = base + min;
        counts = next;
    }
    let population = counts
        .iter()
        .try_fold(0u64, |acc, &c| acc.checked_add(c))
        .ok_or(Censored)?;
    let max_position = counts
        .iter()
        .rposition(|&c| c > 0)
        .map(|i| (lo + i as i64) as f64);
    Ok(snapshot(model, n, population, max_position))
}

fn snapshot(model: &Model, n: usize, population: u64, max_position: Option<f64>) -> BrwSnapshot {
    BrwSnapshot {
        n,
        population,
        max_position,
        martingale_w: population as f64 / model.offspring.mean().powi(n as i32),
    }
}

/// Population size `Z_n`; each generation's offspring total is drawn as a
/// multinomial over child counts. Overflow of `u64` censors the replicate.
pub fn sample_gw<R: Rng>(
    offspring: &OffspringLaw,
    n: usize,
    rng: &mut R,
) -> std::result::Result<u64, Censored> {
    let mut z: u64 = 1;
    for _ in 0..n {
        if z == 0 {
            break;
        }
        let children = multinomial_sum(offspring.weights(), |k| k as i128, z, rng);
        z = u64::try_from(children).map_err(|_| Censored)?;
    }
    Ok(z)
}

/// Maximum of `Z_n` independent `n`-step walks, with `Z_n` drawn from the
/// Galton–Watson process alone. Censored when `Z_n` exceeds the budget.
pub fn sample_ind_max<R: Rng>(
    model: &Model,
    n: usize,
    budget: u64,
    rng: &mut R,
) -> std::result::Result<BrwSnapshot, Censored> {
    let z = sample_gw(&model.offspring, n, rng)?;
    if z > budget {
        return Err(Censored);
    }
    let max_position = (0..z)
        .map(|_| walk_endpoint(&model.step, n, rng))
        .reduce(f64::max);
    Ok(snapshot(model, n, z, max_position))
}

/// Which simulated process an event is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    BrwMax,
    IndMax,
    GwCount,
}

impl std::str::FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brw_max" | "brw-max" => Ok(Quantity::BrwMax),
            "ind_max" | "ind-max" => Ok(Quantity::IndMax),
            "gw_count" | "gw-count" => Ok(Quantity::GwCount),
            other => Err(Error::domain(format!(
                "unknown quantity `{other}` (expected brw_max, ind_max or gw_count)"
            ))),
        }
    }
}

/// `{quantity <= threshold}` or `{quantity >= threshold}` at generation `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub quantity: Quantity,
    pub direction: Direction,
    pub threshold: f64,
    /// Restrict to replicates with `Z_n > 0`.
    pub conditioned: bool,
}

impl Event {
    /// `None` when the replicate is excluded by conditioning.
    fn holds(&self, snap: &BrwSnapshot) -> Option<bool> {
        if self.conditioned && snap.population == 0 {
            return None;
        }
        let value = match self.quantity {
            Quantity::GwCount => Some(snap.population as f64),
            Quantity::BrwMax | Quantity::IndMax => snap.max_position,
        };
        Some(match (value, self.direction) {
            // M_n = -inf on extinction
            (None, Direction::AtMost) => true,
            (None, Direction::AtLeast) => false,
            (Some(v), Direction::AtMost) => v <= self.threshold,
            (Some(v), Direction::AtLeast) => v >= self.threshold,
        })
    }
}

/// Simulates `replicates` independent snapshots of `quantity` at generation
/// `n`, in replicate order.
pub fn simulate(
    model: &Model,
    quantity: Quantity,
    n: usize,
    replicates: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<Vec<std::result::Result<BrwSnapshot, Censored>>> {
    let offspring = OffspringSampler::new(&model.offspring);
    let step = StepSampler::new(&model.step);
    let lattice = match opts.sampler {
        BrwSampler::Occupation => Some(model.step.as_lattice()?),
        BrwSampler::Particles => None,
    };
    let budget = opts.budget;
    Ok((0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            match quantity {
                Quantity::BrwMax => match lattice {
                    Some(l) => run_occupation(model, l, n, budget, &mut rng),
                    None => run_brw(model, &offspring, &step, n, budget, &mut rng),
                },
                Quantity::IndMax => sample_ind_max(model, n, budget, &mut rng),
                Quantity::GwCount => sample_gw(&model.offspring, n, &mut rng)
                    .map(|z| snapshot(model, n, z, None)),
            }
        })
        .collect())
}

/// Proportion estimate of an event with a Wilson interval.
pub fn estimate_event(
    model: &Model,
    event: Event,
    n: usize,
    replicates: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<EstimateCI> {
    check_replicates(replicates)?;
    let runs = simulate(model, event.quantity, n, replicates, seed, opts)?;
    let censored = runs.iter().filter(|r| r.is_err()).count() as u64;
    let outcomes: Vec<bool> = runs
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter_map(|s| event.holds(s))
        .collect();
    if outcomes.is_empty() {
        return Err(Error::NoReplicates(format!(
            "no usable replicates out of {replicates} ({censored} censored)"
        )));
    }
    let successes = outcomes.iter().filter(|&&b| b).count() as u64;
    Ok(proportion_estimate(
        successes,
        outcomes.len() as u64,
        replicates,
        censored,
        event.conditioned,
        seed,
        opts.confidence,
    ))
}

/// Mean of `W_n = Z_n / m^n` from Galton–Watson runs.
pub fn kesten_stigum(
    offspring: &OffspringLaw,
    n: usize,
    replicates: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<EstimateCI> {
    check_replicates(replicates)?;
    offspring.require_supercritical()?;
    let scale = offspring.mean().powi(n as i32);
    let runs: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            sample_gw(offspring, n, &mut rng).ok().map(|z| z as f64 / scale)
        })
        .collect();
    let censored = runs.iter().filter(|r| r.is_none()).count() as u64;
    let samples: Vec<f64> = runs.into_iter().flatten().collect();
    mean_estimate(&samples, replicates, censored, false, seed, opts.confidence)
}

/// Mean of `M_n / n` over surviving branching random walk runs.
pub fn speed_mean(
    model: &Model,
    n: usize,
    replicates: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<EstimateCI> {
    check_replicates(replicates)?;
    if n == 0 {
        return Err(Error::domain("speed needs n >= 1"));
    }
    let runs = simulate(model, Quantity::BrwMax, n, replicates, seed, opts)?;
    let censored = runs.iter().filter(|r| r.is_err()).count() as u64;
    let samples: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter_map(|s| s.max_position)
        .map(|m| m / n as f64)
        .collect();
    mean_estimate(&samples, replicates, censored, true, seed, opts.confidence)
}

/// Importance-sampling estimate of `P(S_n >= x n)` for `x` above the mean,
/// sampling steps from the law tilted to mean `x` and reweighting by
/// `exp(-lambda S_n + n cgf(lambda))`.
pub fn tilted_tail_rw(
    step: &StepLaw,
    x: f64,
    n: usize,
    replicates: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<EstimateCI> {
    check_replicates(replicates)?;
    if n == 0 {
        return Err(Error::domain("tilted tail needs n >= 1"));
    }
    let mean = step.mean();
    if x <= mean {
        return Err(Error::domain(format!(
            "x = {x} is not above the mean {mean}; no tilt is needed, use plain Monte Carlo"
        )));
    }
    if let Some(max) = step.support_max() {
        if x >= max {
            return Err(Error::domain(format!(
                "x = {x} is at or beyond the support edge {max}; the tilt diverges, \
                 use the exact boundary formula P(X_1 = max)^n instead"
            )));
        }
    }
    let lambda = solve_tilt(step, x)?;
    let log_mgf = step.cgf(lambda)?.value;
    let nf = n as f64;
    let weights: Vec<f64> = match step {
        StepLaw::Lattice(l) => {
            let threshold = (x * nf - 1e-9).ceil() as i128;
            let tilted = l.tilted(lambda)?;
            (0..replicates)
                .into_par_iter()
                .map(|i| {
                    let mut rng = replicate_rng(seed, i);
                    let s = lattice_endpoint(&tilted, n, &mut rng);
                    if s >= threshold {
                        (-lambda * s as f64 + nf * log_mgf).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        StepLaw::Gaussian(g) => {
            let sd = g.sigma() * nf.sqrt();
            (0..replicates)
                .into_par_iter()
                .map(|i| {
                    let mut rng = replicate_rng(seed, i);
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    let s = x * nf + sd * z;
                    if s >= x * nf {
                        (-lambda * s + nf * log_mgf).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    let mut est = mean_estimate(&weights, replicates, 0, false, seed, opts.confidence)?;
    est.ci_low = est.ci_low.max(0.0);
    Ok(est)
}

/// Estimates `n P(Z_n > 0)` for a critical offspring law.
pub fn critical_survival_mc(
    offspring: &OffspringLaw,
    n: usize,
    replicates: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<EstimateCI> {
    check_replicates(replicates)?;
    let p1 = offspring.weights().get(1).copied().unwrap_or(0.0);
    if (offspring.mean() - 1.0).abs() > 1e-12 || p1 >= 1.0 {
        return Err(Error::assumption(
            Assumption::Critical,
            format!("need m = 1 and p(1) < 1, got m = {}", offspring.mean()),
        ));
    }
    let alive: Vec<bool> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            matches!(sample_gw(offspring, n, &mut rng), Ok(z) if z > 0)
        })
        .collect();
    let successes = alive.iter().filter(|&&a| a).count() as u64;
    let mut est = proportion_estimate(
        successes,
        replicates,
        replicates,
        0,
        false,
        seed,
        opts.confidence,
    );
    let nf = n as f64;
    est.point *= nf;
    est.stderr *= nf;
    est.ci_low *= nf;
    est.ci_high *= nf;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianStep;

    fn model_a() -> Model {
        Model::new(
            OffspringLaw::new(&[0.0, 0.5, 0.5]).unwrap(),
            StepLaw::Lattice(LatticeStep::rademacher()),
        )
    }

    #[test]
    fn root_snapshot() {
        let mut rng = replicate_rng(1, 0);
        let s = sample_brw(&model_a(), 0, DEFAULT_BUDGET, &mut rng).unwrap();
        assert_eq!(s.population, 1);
        assert_eq!(s.max_position, Some(0.0));
        assert_eq!(s.martingale_w, 1.0);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = replicate_rng(7, 3).random();
        let b: u64 = replicate_rng(7, 3).random();
        let c: u64 = replicate_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn budget_censors() {
        let mut rng = replicate_rng(1, 0);
        let m = Model::new(
            OffspringLaw::new(&[0.0, 0.0, 1.0]).unwrap(),
            StepLaw::Lattice(LatticeStep::rademacher()),
        );
        assert_eq!(sample_brw(&m, 20, 1000, &mut rng), Err(Censored));
        assert!(sample_brw(&m, 8, 1000, &mut rng).is_ok());
        assert_eq!(sample_ind_max(&m, 20, 1000, &mut rng), Err(Censored));
        assert_eq!(sample_gw(&m.offspring, 70, &mut rng), Err(Censored));
    }

    #[test]
    fn occupation_sampler_matches_particles_in_law() {
        // Both samplers must cover the exact P(M_6 <= 0).
        let m = model_a();
        let exact = crate::exact::brw_max_cdf(&LatticeStep::rademacher(), &m.offspring, 6)
            .unwrap()
            .cdf(0);
        for sampler in [BrwSampler::Particles, BrwSampler::Occupation] {
            let opts = SimOptions {
                sampler,
                ..SimOptions::default()
            };
            let event = Event {
                quantity: Quantity::BrwMax,
                direction: Direction::AtMost,
                threshold: 0.0,
                conditioned: false,
            };
            let e = estimate_event(&m, event, 6, 200_000, 9, opts).unwrap();
            assert!(e.contains(exact), "{sampler:?}: {e:?} vs {exact}");
        }
    }

    #[test]
    fn occupation_deterministic_growth_and_overflow() {
        let m = Model::new(
            OffspringLaw::new(&[0.0, 0.0, 1.0]).unwrap(),
            StepLaw::Lattice(LatticeStep::new(&[-1, 1], &[0.0, 1.0]).unwrap()),
        );
        let mut rng = replicate_rng(5, 0);
        let s = sample_brw_occupation(&m, 40, DEFAULT_BUDGET, &mut rng).unwrap().unwrap();
        assert_eq!(s.population, 1 << 40);
        assert_eq!(s.max_position, Some(40.0));
        assert_eq!(sample_brw_occupation(&m, 64, DEFAULT_BUDGET, &mut rng).unwrap(), Err(Censored));
        let g = Model::new(m.offspring.clone(), StepLaw::Gaussian(GaussianStep::new(0.0, 1.0).unwrap()));
        assert!(sample_brw_occupation(&g, 3, DEFAULT_BUDGET, &mut rng).is_err());
    }

    #[test]
    fn deterministic_population_growth() {
        let m = Model::new(
            OffspringLaw::new(&[0.0, 0.0, 1.0]).unwrap(),
            StepLaw::Lattice(LatticeStep::new(&[1], &[1.0]).unwrap()),
        );
        let mut rng = replicate_rng(5, 0);
        let s = sample_brw(&m, 6, DEFAULT_BUDGET, &mut rng).unwrap();
        assert_eq!(s.population, 64);
        assert_eq!(s.max_position, Some(6.0));
        assert_eq!(s.martingale_w, 1.0);
        let s = sample_ind_max(&m, 6, DEFAULT_BUDGET, &mut rng).unwrap();
        assert_eq!((s.population, s.max_position), (64, Some(6.0)));
    }

    #[test]
    fn wilson_contains_point_and_handles_extremes() {
        let (lo, hi) = wilson_interval(0, 1000, 0.99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        let (lo, hi) = wilson_interval(1000, 1000, 0.99);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.99);
        for s in [1, 10, 500, 999] {
            let (lo, hi) = wilson_interval(s, 1000, 0.99);
            let p = s as f64 / 1000.0;
            assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn impossible_event_estimates_zero() {
        let event = Event {
            quantity: Quantity::BrwMax,
            direction: Direction::AtLeast,
            threshold: 6.0,
            conditioned: true,
        };
        let e = estimate_event(&model_a(), event, 5, 1000, 3, SimOptions::default()).unwrap();
        assert_eq!(e.point, 0.0);
        assert_eq!(e.ci_low, 0.0);
        assert_eq!(e.censored + e.completed(), e.replicates);
    }

    #[test]
    fn rejects_few_replicates_and_bad_tilts() {
        let e = Event {
            quantity: Quantity::GwCount,
            direction: Direction::AtMost,
            threshold: 3.0,
            conditioned: false,
        };
        assert!(estimate_event(&model_a(), e, 3, 50, 1, SimOptions::default()).is_err());
        let r = StepLaw::Lattice(LatticeStep::rademacher());
        assert!(tilted_tail_rw(&r, 0.0, 10, 1000, 1, SimOptions::default()).is_err());
        assert!(tilted_tail_rw(&r, 1.0, 10, 1000, 1, SimOptions::default()).is_err());
        let supercritical = OffspringLaw::new(&[0.0, 0.5, 0.5]).unwrap();
        assert!(critical_survival_mc(&supercritical, 10, 1000, 1, SimOptions::default()).is_err());
    }

    #[test]
    fn all_censored_is_an_error() {
        let m = Model::new(
            OffspringLaw::new(&[0.0, 0.0, 1.0]).unwrap(),
            StepLaw::Gaussian(GaussianStep::new(0.0, 1.0).unwrap()),
        );
        let opts = SimOptions {
            budget: 100,
            ..SimOptions::default()
        };
        assert!(matches!(
            speed_mean(&m, 12, 200, 1, opts),
            Err(Error::NoReplicates(_))
        ));
    }

    #[test]
    fn critical_one_step() {
        let law = OffspringLaw::new(&[0.5, 0.0, 0.5]).unwrap();
        let e = critical_survival_mc(&law, 1, 100_000, 11, SimOptions::default()).unwrap();
        assert!(e.contains(0.5));
        assert!((e.point - 0.5).abs() < 0.01);
    }
}
