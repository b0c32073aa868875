//! Exact finite-n oracles on integer lattices.
//!
//! Random-walk laws come from iterated convolution, Galton–Watson laws from
//! iterating the offspring pgf, and the laws of the two maxima from the
//! one-generation decomposition
//!
//! ```text
//! P(M_{n+1} <= y) = pgf( sum_j p_j P(M_n <= y - o_j) )
//! P(M~_n <= y)    = pgf^{(n)}( P(S_n <= y) )
//! ```
//!
//! Each CDF is carried in three pieces so that both tails keep full relative
//! precision: the extinction mass, the mass of `{M_n <= y, Z_n > 0}`, and the
//! upper tail `P(M_n > y)`.

use std::collections::BTreeMap;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{GaussianStep, LatticeStep, OffspringLaw};
use crate::numeric::compensated_sum;

/// Largest grid the oracles will allocate.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Cap on `n * grid points * support size` for one oracle run.
pub const MAX_CELL_UPDATES: u64 = 4_000_000_000;

/// Probabilities below this are stored as zero.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Default tolerance of the dominance check.
pub const DOMINANCE_TOLERANCE: f64 = 1e-11;

fn floor_tiny(p: f64) -> f64 {
    if p < UNDERFLOW_FLOOR {
        0.0
    } else {
        p
    }
}

/// Which tail of a distribution an event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `{M <= y}`
    AtMost,
    /// `{M >= y}`
    AtLeast,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "at_most" | "at-most" | "le" => Ok(Direction::AtMost),
            "at_least" | "at-least" | "ge" => Ok(Direction::AtLeast),
            other => Err(Error::domain(format!(
                "unknown direction `{other}` (expected at_most or at_least)"
            ))),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::AtMost => "at_most",
            Direction::AtLeast => "at_least",
        })
    }
}

/// Exact law of a maximum (or walk position) at generation `n` on the integer
/// grid `[lo, hi]`, with the extinction mass sitting at `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCdf {
    pub n: usize,
    pub lo: i64,
    pub hi: i64,
    /// `P(Z_n = 0)`, the mass at `-inf`.
    pub base: f64,
    /// `P(M_n <= y)` for `y = lo..=hi`, extinction included.
    pub values: Vec<f64>,
    /// `P(M_n <= y, Z_n > 0)`.
    pub alive: Vec<f64>,
    /// `P(M_n > y)`.
    pub upper: Vec<f64>,
}

impl LatticeCdf {
    fn from_parts(n: usize, lo: i64, base: f64, alive: Vec<f64>, upper: Vec<f64>) -> Self {
        let hi = lo + alive.len() as i64 - 1;
        let values = alive.iter().map(|a| (base + a).min(1.0)).collect();
        LatticeCdf {
            n,
            lo,
            hi,
            base,
            values,
            alive,
            upper,
        }
    }

    /// `P(Z_n > 0)`.
    pub fn survival(&self) -> f64 {
        1.0 - self.base
    }

    fn index(&self, y: i64) -> Option<usize> {
        (self.lo..=self.hi)
            .contains(&y)
            .then(|| (y - self.lo) as usize)
    }

    /// `P(M_n <= y)`, including the extinction mass.
    pub fn cdf(&self, y: i64) -> f64 {
        if y < self.lo {
            self.base
        } else if y >= self.hi {
            1.0
        } else {
            self.values[(y - self.lo) as usize]
        }
    }

    /// `P(M_n <= y, Z_n > 0)`.
    pub fn alive_at(&self, y: i64) -> f64 {
        match self.index(y) {
            Some(i) => self.alive[i],
            None if y < self.lo => 0.0,
            None => self.survival(),
        }
    }

    /// `P(M_n > y)`.
    pub fn upper_at(&self, y: i64) -> f64 {
        match self.index(y) {
            Some(i) => self.upper[i],
            None if y < self.lo => self.survival(),
            None => 0.0,
        }
    }

    /// Probability conditioned on `{Z_n > 0}`; the extinction mass never
    /// counts as `<= y`.
    pub fn conditional_prob(&self, direction: Direction, y: i64) -> Result<f64> {
        let survival = self.survival();
        if survival <= 0.0 {
            return Err(Error::domain(format!(
                "population is extinct almost surely at generation {}",
                self.n
            )));
        }
        let p = match direction {
            Direction::AtMost => self.alive_at(y),
            Direction::AtLeast => self.upper_at(y - 1),
        };
        Ok((p / survival).min(1.0))
    }

    /// Unconditioned probability; `{M_n <= y}` includes extinction.
    pub fn unconditional_prob(&self, direction: Direction, y: i64) -> f64 {
        match direction {
            Direction::AtMost => self.cdf(y),
            Direction::AtLeast => self.upper_at(y - 1),
        }
    }

    /// Smallest `y` with `P(M_n <= y | Z_n > 0) >= level`.
    pub fn conditional_quantile(&self, level: f64) -> Result<i64> {
        let survival = self.survival();
        if survival <= 0.0 {
            return Err(Error::domain("population is extinct almost surely"));
        }
        Ok(self
            .alive
            .iter()
            .position(|a| a / survival >= level)
            .map_or(self.hi, |i| self.lo + i as i64))
    }

    /// Mean of `M_n` given `Z_n > 0`.
    pub fn conditional_mean(&self) -> Result<f64> {
        let survival = self.survival();
        if survival <= 0.0 {
            return Err(Error::domain("population is extinct almost surely"));
        }
        let mut prev = 0.0;
        let terms = self.alive.iter().enumerate().map(|(i, &a)| {
            let mass = a - prev;
            prev = a;
            (self.lo + i as i64) as f64 * mass
        });
        Ok(compensated_sum(terms) / survival)
    }
}

/// Number of grid points generation `n` needs; a budget error when the grid
/// or the total work of reaching generation `n` exceeds its limit.
pub fn check_grid(n: usize, step: &LatticeStep) -> Result<usize> {
    let span = (step.max_offset() - step.min_offset()) as u128;
    let points = span * n as u128 + 1;
    if points > MAX_GRID_POINTS as u128 {
        return Err(Error::Budget(format!(
            "generation {n} needs a grid of {points} points (limit {MAX_GRID_POINTS})"
        )));
    }
    let work = points * n as u128 * step.offsets().len() as u128;
    if work > MAX_CELL_UPDATES as u128 {
        return Err(Error::Budget(format!(
            "generation {n} needs about {work} cell updates (limit {MAX_CELL_UPDATES})"
        )));
    }
    Ok(points as usize)
}

/// Exact law of `S_n` by iterated convolution.
pub fn rw_cdf(step: &LatticeStep, n: usize) -> Result<LatticeCdf> {
    let points = check_grid(n, step)?;
    let min = step.min_offset();
    let mut pmf = vec![0.0; points];
    pmf[0] = 1.0;
    let mut len = 1;
    for _ in 0..n {
        let new_len = len + (step.max_offset() - min) as usize;
        let mut next = vec![0.0; new_len];
        for (&o, &p) in step.offsets().iter().zip(step.probs()) {
            let shift = (o - min) as usize;
            for (i, &v) in pmf[..len].iter().enumerate() {
                next[i + shift] += p * v;
            }
        }
        for v in next.iter_mut() {
            *v = floor_tiny(*v);
        }
        pmf[..new_len].copy_from_slice(&next);
        len = new_len;
    }
    pmf.truncate(len);

    let mut alive = Vec::with_capacity(len);
    let mut acc = Neumaier::default();
    for &p in &pmf {
        acc.add(p);
        alive.push(acc.value().min(1.0));
    }
    let mut upper = vec![0.0; len];
    let mut acc = Neumaier::default();
    for i in (0..len).rev() {
        upper[i] = acc.value().min(1.0);
        acc.add(pmf[i]);
    }
    Ok(LatticeCdf::from_parts(n, n as i64 * min, 0.0, alive, upper))
}

#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact law of `Z_n` truncated at `K_cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct GwPmf {
    pub n: usize,
    /// `P(Z_n = k)` for `k = 0..=K_cap`.
    pub probs: Vec<f64>,
    /// Mass above `K_cap`, i.e. `1 - sum(probs)`.
    pub truncated_tail: f64,
    /// Markov bound `m^n / K_cap` on the truncated mass.
    pub markov_bound: f64,
}

impl GwPmf {
    pub fn kcap(&self) -> usize {
        self.probs.len() - 1
    }

    /// `P(Z_n <= k)`.
    pub fn cumulative(&self, k: usize) -> f64 {
        compensated_sum(self.probs[..=k.min(self.kcap())].iter().copied())
    }

    /// `P(1 <= Z_n <= k)`.
    pub fn alive_cumulative(&self, k: usize) -> f64 {
        compensated_sum(self.probs[1..=k.min(self.kcap())].iter().copied())
    }

    /// Errors when the truncated mass exceeds `tolerance`.
    pub fn check_tail(&self, tolerance: f64) -> Result<()> {
        if self.truncated_tail > tolerance {
            Err(Error::Budget(format!(
                "K_cap = {} leaves tail mass {:e} above tolerance {:e}",
                self.kcap(),
                self.truncated_tail,
                tolerance
            )))
        } else {
            Ok(())
        }
    }
}

/// Truncated power series products switch to FFT above this length.
const FFT_THRESHOLD: usize = 512;

fn truncated_product(a: &[f64], b: &[f64], cap: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let out_len = (a.len() + b.len() - 1).min(cap);
    if a.len().min(b.len()) <= FFT_THRESHOLD {
        let mut out = vec![0.0; out_len];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 || i >= out_len {
                continue;
            }
            for (j, &y) in b.iter().take(out_len - i).enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let size = (a.len() + b.len() - 1).next_power_of_two();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    fft.process(&mut fa);
    if std::ptr::eq(a, b) {
        for v in fa.iter_mut() {
            *v = *v * *v;
        }
    } else {
        let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fb.resize(size, Complex::new(0.0, 0.0));
        fft.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= *y;
        }
    }
    ifft.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len]
        .iter()
        .map(|c| (c.re * scale).max(0.0))
        .collect()
}

/// Exact `P(Z_n = k)` for `k <= kcap` by composing the offspring pgf as a
/// truncated power series.
///
/// Products of series longer than 512 terms use an FFT; coefficients on that
/// path are exact up to round-off relative to the total retained mass, which
/// is enough for partial sums but not for isolated coefficients many orders
/// of magnitude below it.
pub fn gw_pmf(offspring: &OffspringLaw, n: usize, kcap: usize) -> Result<GwPmf> {
    if kcap == 0 {
        return Err(Error::domain("K_cap must be at least 1"));
    }
    if kcap >= MAX_GRID_POINTS {
        return Err(Error::Budget(format!(
            "generation {n} needs a pmf truncated at K_cap = {kcap} (limit {MAX_GRID_POINTS})"
        )));
    }
    let cap = kcap + 1;
    let weights = offspring.weights();
    let mut planner = FftPlanner::new();
    let mut h = vec![0.0, 1.0];
    h.truncate(cap);
    for _ in 0..n {
        // Horner: pgf(h) = p_0 + h (p_1 + h (p_2 + ...))
        let mut acc = vec![*weights.last().unwrap()];
        for &w in weights.iter().rev().skip(1) {
            acc = if acc.len() == 1 {
                h.iter().map(|x| x * acc[0]).collect()
            } else if acc == h {
                truncated_product(&h, &h, cap, &mut planner)
            } else {
                truncated_product(&acc, &h, cap, &mut planner)
            };
            acc[0] += w;
        }
        h = acc.into_iter().map(floor_tiny).collect();
        while h.len() > 1 && *h.last().unwrap() == 0.0 {
            h.pop();
        }
    }
    h.resize(cap, 0.0);
    let total = compensated_sum(h.iter().copied());
    Ok(GwPmf {
        n,
        probs: h,
        truncated_tail: (1.0 - total).max(0.0),
        markov_bound: (offspring.mean().powi(n as i32) / kcap as f64).min(1.0),
    })
}

/// `P(Z_n <= k_max | Z_n > 0)` from the truncated pmf.
pub fn gw_lower_tail(offspring: &OffspringLaw, n: usize, k_max: usize) -> Result<f64> {
    let pmf = gw_pmf(offspring, n, k_max.max(1))?;
    let survival = gw_survival(offspring, n);
    if survival <= 0.0 {
        return Err(Error::domain("population is extinct almost surely"));
    }
    Ok(pmf.alive_cumulative(k_max) / survival)
}

/// Closed-form `P(S_n >= x n)` for Gaussian steps.
pub fn gaussian_walk_tail(step: &GaussianStep, x: f64, n: usize) -> f64 {
    let nf = n as f64;
    let z = (x - step.mean()) * nf.sqrt() / step.sigma();
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Iterates `b -> pgf(b)` from zero: `P(Z_i = 0)` for `i = 0..=n`.
fn extinction_masses(offspring: &OffspringLaw, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut b = 0.0;
    out.push(b);
    for _ in 0..n {
        b = offspring.pgf(b);
        out.push(b);
    }
    out
}

/// `P(Z_n > 0)`, iterated on the complement so small survival probabilities
/// keep their relative precision.
pub fn gw_survival(offspring: &OffspringLaw, n: usize) -> f64 {
    let mut u = 1.0;
    for _ in 0..n {
        u = offspring.pgf_increment(1.0 - u, u);
    }
    u
}

/// Iterator over the exact laws of `M_0, M_1, ...`.
#[derive(Debug, Clone)]
pub struct BrwMaxCdfs<'a> {
    step: &'a LatticeStep,
    offspring: &'a OffspringLaw,
    current: LatticeCdf,
}

impl<'a> BrwMaxCdfs<'a> {
    pub fn new(step: &'a LatticeStep, offspring: &'a OffspringLaw) -> Self {
        BrwMaxCdfs {
            step,
            offspring,
            current: LatticeCdf::from_parts(0, 0, 0.0, vec![1.0], vec![0.0]),
        }
    }

    pub fn current(&self) -> &LatticeCdf {
        &self.current
    }

    /// Advances one generation.
    pub fn advance(&mut self) -> Result<&LatticeCdf> {
        let prev = &self.current;
        let n = prev.n + 1;
        check_grid(n, self.step)?;
        let (min, max) = (self.step.min_offset(), self.step.max_offset());
        let lo = prev.lo + min;
        let hi = prev.hi + max;
        let b = prev.base;
        let len = (hi - lo + 1) as usize;
        let mut alive = Vec::with_capacity(len);
        let mut upper = Vec::with_capacity(len);
        for y in lo..=hi {
            let mut v_alive = 0.0;
            let mut v_upper = 0.0;
            for (&o, &p) in self.step.offsets().iter().zip(self.step.probs()) {
                v_alive += p * prev.alive_at(y - o);
                v_upper += p * prev.upper_at(y - o);
            }
            alive.push(floor_tiny(self.offspring.pgf_increment(b, v_alive)));
            upper.push(floor_tiny(self.offspring.pgf_increment(1.0 - v_upper, v_upper)));
        }
        let base = self.offspring.pgf(b);
        self.current = LatticeCdf::from_parts(n, lo, base, alive, upper);
        Ok(&self.current)
    }
}

/// Exact law of the branching random walk maximum `M_n`.
pub fn brw_max_cdf(step: &LatticeStep, offspring: &OffspringLaw, n: usize) -> Result<LatticeCdf> {
    check_grid(n, step)?;
    let mut iter = BrwMaxCdfs::new(step, offspring);
    for _ in 0..n {
        iter.advance()?;
    }
    Ok(iter.current)
}

/// Exact law of `M~_n`, the maximum of `Z_n` independent walks, via
/// `P(M~_n <= y) = pgf^{(n)}(P(S_n <= y))`.
pub fn ind_max_cdf(step: &LatticeStep, offspring: &OffspringLaw, n: usize) -> Result<LatticeCdf> {
    let walk = rw_cdf(step, n)?;
    let bases = extinction_masses(offspring, n);
    let len = walk.values.len();
    let mut alive = Vec::with_capacity(len);
    let mut upper = Vec::with_capacity(len);
    for i in 0..len {
        let mut delta = walk.values[i];
        let mut tail = walk.upper[i];
        for &b in &bases[..n] {
            delta = offspring.pgf_increment(b, delta);
            tail = offspring.pgf_increment(1.0 - tail, tail);
        }
        alive.push(floor_tiny(delta));
        upper.push(floor_tiny(tail));
    }
    Ok(LatticeCdf::from_parts(n, walk.lo, bases[n], alive, upper))
}

/// How [`finite_n_rate`] turns log-probabilities into a decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateMode {
    /// Least-squares slope of `-log p_n` against `n`.
    Slope,
    /// `-(log p_{2n} - log p_n) / n` at the largest available pair, which
    /// cancels polynomial prefactors.
    #[default]
    Successive,
}

/// Empirical exponential decay rate from `(n, log p_n)` samples.
///
/// Entries with `log p = -inf` (probabilities floored to zero) are skipped.
/// In successive mode the largest `n` whose double is also present is used;
/// without such a pair the two largest `n` are differenced.
pub fn finite_n_rate(log_probs: &[(usize, f64)], mode: RateMode) -> Result<f64> {
    let finite: BTreeMap<usize, f64> = log_probs
        .iter()
        .filter(|(_, lp)| lp.is_finite())
        .map(|&(n, lp)| (n, lp))
        .collect();
    if finite.len() < 2 {
        return Err(Error::domain(
            "rate extraction needs at least two positive probabilities",
        ));
    }
    match mode {
        RateMode::Slope => {
            let k = finite.len() as f64;
            let mean_n = finite.keys().map(|&n| n as f64).sum::<f64>() / k;
            let mean_y = finite.values().map(|lp| -lp).sum::<f64>() / k;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (&n, &lp) in &finite {
                let dx = n as f64 - mean_n;
                sxy += dx * (-lp - mean_y);
                sxx += dx * dx;
            }
            Ok(sxy / sxx)
        }
        RateMode::Successive => {
            let doubled = finite
                .keys()
                .rev()
                .find(|&&n| n > 0 && finite.contains_key(&(2 * n)))
                .copied();
            let (a, b) = match doubled {
                Some(n) => (n, 2 * n),
                None => {
                    let mut keys = finite.keys().rev();
                    let b = *keys.next().unwrap();
                    (*keys.next().unwrap(), b)
                }
            };
            Ok(-(finite[&b] - finite[&a]) / (b - a) as f64)
        }
    }
}

/// Point where a dominance check failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub n: usize,
    pub y: i64,
    /// `P(dominating <= y) - P(dominated <= y)`; positive means violated.
    pub excess: f64,
}

/// Largest CDF gap found at one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapProfile {
    pub n: usize,
    pub y: i64,
    /// `P(M_n <= y) - P(M~_n <= y)` at its maximum over `y`.
    pub gap: f64,
}

/// Outcome of checking `M_n ⪯ M~_n`, i.e. `P(M~_n <= y) <= P(M_n <= y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub n_max: usize,
    pub tolerance: f64,
    pub violations: Vec<Violation>,
    pub profile: Vec<GapProfile>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> Option<Violation> {
        self.violations
            .iter()
            .copied()
            .max_by(|a, b| a.excess.total_cmp(&b.excess))
    }

    pub fn largest_gap(&self) -> Option<GapProfile> {
        self.profile
            .iter()
            .copied()
            .max_by(|a, b| a.gap.total_cmp(&b.gap))
    }

    /// Adds one generation, checking `P(dominating <= y) <= P(dominated <= y) + tol`.
    pub fn record(&mut self, n: usize, dominated: &LatticeCdf, dominating: &LatticeCdf) {
        let lo = dominated.lo.min(dominating.lo);
        let hi = dominated.hi.max(dominating.hi);
        let mut best = GapProfile {
            n,
            y: lo,
            gap: f64::NEG_INFINITY,
        };
        for y in lo..=hi {
            let gap = dominated.cdf(y) - dominating.cdf(y);
            if gap > best.gap {
                best = GapProfile { n, y, gap };
            }
            if -gap > self.tolerance {
                self.violations.push(Violation { n, y, excess: -gap });
            }
        }
        self.profile.push(best);
    }

    pub fn empty(n_max: usize, tolerance: f64) -> Self {
        DominanceReport {
            n_max,
            tolerance,
            violations: Vec::new(),
            profile: Vec::new(),
        }
    }
}

/// Checks `M_n ⪯ M~_n` for every `n <= n_max` on the full grid.
pub fn check_dominance(
    step: &LatticeStep,
    offspring: &OffspringLaw,
    n_max: usize,
) -> Result<DominanceReport> {
    check_grid(n_max, step)?;
    let mut report = DominanceReport::empty(n_max, DOMINANCE_TOLERANCE);
    let mut brw = BrwMaxCdfs::new(step, offspring);
    for n in 0..=n_max {
        if n > 0 {
            brw.advance()?;
        }
        let ind = ind_max_cdf(step, offspring, n)?;
        report.record(n, brw.current(), &ind);
    }
    Ok(report)
}

/// Support of `Z_n`, computed with exact boolean sumsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachable {
    pub n: usize,
    /// Every `k <= kcap` with `P(Z_n = k) > 0`, ascending (0 included when
    /// extinction by generation `n` is possible).
    pub counts: Vec<usize>,
    /// Some reachable counts exceed `kcap` and are not listed.
    pub truncated: bool,
}

impl Reachable {
    /// Positive reachable counts, the generation-`n` slice of the set `A`.
    pub fn positive(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().copied().filter(|&k| k > 0)
    }
}

pub fn reachable_counts(offspring: &OffspringLaw, n: usize, kcap: usize) -> Reachable {
    let support: Vec<usize> = offspring
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, _)| k)
        .collect();
    let max_children = *support.last().unwrap();
    let mut current = vec![false; kcap + 1];
    let mut truncated = kcap == 0;
    if kcap >= 1 {
        current[1] = true;
    }
    // Z_{i+1} is a sum of j independent copies of Z_i, j drawn from the
    // offspring law, so its support is the union of j-fold sumsets.
    for _ in 0..n {
        let mut next = vec![false; kcap + 1];
        let mut next_truncated = false;
        let mut sums = vec![false; kcap + 1];
        sums[0] = true;
        let mut sums_over = false;
        for j in 0..=max_children {
            if support.binary_search(&j).is_ok() {
                for (k, &r) in sums.iter().enumerate() {
                    next[k] |= r;
                }
                next_truncated |= sums_over;
            }
            if j == max_children {
                break;
            }
            let mut grown = vec![false; kcap + 1];
            let mut grown_over = sums_over || truncated;
            for (a, _) in sums.iter().enumerate().filter(|(_, &r)| r) {
                for (b, _) in current.iter().enumerate().filter(|(_, &r)| r) {
                    if a + b > kcap {
                        grown_over = true;
                    } else {
                        grown[a + b] = true;
                    }
                }
            }
            sums = grown;
            sums_over = grown_over;
        }
        current = next;
        truncated = next_truncated;
    }
    Reachable {
        n,
        counts: current
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(k, _)| k)
            .collect(),
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rademacher() -> LatticeStep {
        LatticeStep::rademacher()
    }

    fn binary() -> OffspringLaw {
        OffspringLaw::new(&[0.0, 0.5, 0.5]).unwrap()
    }

    fn with_deaths() -> OffspringLaw {
        OffspringLaw::new(&[0.25, 0.0, 0.75]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn walk_law_small_n() {
        let c = rw_cdf(&rademacher(), 2).unwrap();
        assert_eq!((c.lo, c.hi), (-2, 2));
        assert!(close(c.cdf(-2), 0.25, 1e-16));
        assert!(close(c.cdf(0), 0.75, 1e-16));
        assert!(close(c.upper_at(0), 0.25, 1e-16));
        assert_eq!(c.cdf(2), 1.0);
        assert_eq!(c.base, 0.0);
    }

    #[test]
    fn walk_tail_rate_near_cramer() {
        let c = rw_cdf(&rademacher(), 100).unwrap();
        let p = c.upper_at(89);
        let i = 0.95 * 1.9f64.ln() + 0.05 * 0.1f64.ln();
        assert!((-p.ln() / 100.0 - i).abs() < 0.05);
        // exact binomial tail: sum_{k >= 95} C(100, k) / 2^100
        let mut tail = 0.0;
        let mut binom = 1.0f64;
        for k in (95..=100).rev() {
            if k < 100 {
                binom = binom * (k + 1) as f64 / (100 - k) as f64;
            }
            tail += binom;
        }
        assert!(close(p / (tail * 0.5f64.powi(100)), 1.0, 1e-12));
    }

    #[test]
    fn walk_budget() {
        let wide = LatticeStep::new(&[-1_000_000, 1_000_000], &[0.5, 0.5]).unwrap();
        assert!(matches!(rw_cdf(&wide, 10), Err(Error::Budget(_))));
    }

    #[test]
    fn galton_watson_pmf_examples() {
        let pmf = gw_pmf(&binary(), 2, 16).unwrap();
        assert!(close(pmf.probs[1], 0.25, 1e-16));
        assert_eq!(pmf.probs[0], 0.0);
        assert!(close(pmf.probs.iter().sum::<f64>() + pmf.truncated_tail, 1.0, 1e-12));
        for n in 1..40 {
            let pmf = gw_pmf(&binary(), n, 8).unwrap();
            assert_eq!(pmf.probs[0], 0.0);
            assert!(close(pmf.probs[1] / 0.5f64.powi(n as i32), 1.0, 1e-12));
            assert!(pmf.truncated_tail <= pmf.markov_bound);
        }
    }

    #[test]
    fn galton_watson_pmf_fft_path_matches_direct() {
        // kcap above the FFT threshold, compared against direct composition
        let law = OffspringLaw::new(&[0.2, 0.3, 0.1, 0.4]).unwrap();
        let fft = gw_pmf(&law, 7, 2000).unwrap();
        let mut h = vec![0.0, 1.0];
        for _ in 0..7 {
            let mut out = vec![0.0; 2001];
            let mut power = vec![1.0];
            for &w in law.weights() {
                for (k, &c) in power.iter().enumerate() {
                    if k <= 2000 {
                        out[k] += w * c;
                    }
                }
                let mut next = vec![0.0; (power.len() + h.len() - 1).min(2001)];
                for (i, &a) in power.iter().enumerate() {
                    for (j, &b) in h.iter().enumerate() {
                        if i + j <= 2000 {
                            next[i + j] += a * b;
                        }
                    }
                }
                power = next;
            }
            h = out;
        }
        let total: f64 = h.iter().sum();
        assert!((fft.cumulative(2000) - total).abs() < 1e-13);
        assert!((fft.cumulative(300) - h[..=300].iter().sum::<f64>()).abs() < 1e-13);
    }

    #[test]
    fn tail_check() {
        let pmf = gw_pmf(&binary(), 10, 4).unwrap();
        assert!(pmf.check_tail(1e-3).is_err());
        let pmf = gw_pmf(&binary(), 3, 8).unwrap();
        assert!(pmf.check_tail(1e-12).is_ok());
        assert!(gw_pmf(&binary(), 3, 0).is_err());
    }

    #[test]
    fn critical_survival_examples() {
        let law = OffspringLaw::new(&[0.5, 0.0, 0.5]).unwrap();
        assert!(close(gw_survival(&law, 1), 0.5, 1e-16));
        assert!(close(gw_survival(&law, 2), 0.375, 1e-16));
        let s = gw_survival(&law, 1000);
        assert!((1000.0 * s - 2.0).abs() / 2.0 < 0.03);
    }

    #[test]
    fn survival_converges_to_one_minus_q() {
        let law = with_deaths();
        assert!(close(gw_survival(&law, 50), 2.0 / 3.0, 1e-10));
        let mut prev = 1.0;
        for n in 0..60 {
            let s = gw_survival(&law, n);
            assert!(s <= prev + 1e-16);
            prev = s;
        }
        assert!(close(gw_survival(&binary(), 200), 1.0, 1e-15));
    }

    #[test]
    fn brw_max_hand_values() {
        let (s, o) = (rademacher(), binary());
        let c0 = brw_max_cdf(&s, &o, 0).unwrap();
        assert_eq!((c0.lo, c0.hi, c0.values.clone()), (0, 0, vec![1.0]));
        assert_eq!(c0.cdf(-1), 0.0);
        let c1 = brw_max_cdf(&s, &o, 1).unwrap();
        assert!(close(c1.cdf(0), 0.375, 1e-16));
        let c2 = brw_max_cdf(&s, &o, 2).unwrap();
        assert!(close(c2.cdf(-2), 0.111328125, 1e-16));
    }

    #[test]
    fn ind_max_hand_values() {
        let (s, o) = (rademacher(), binary());
        let c1 = ind_max_cdf(&s, &o, 1).unwrap();
        assert!(close(c1.cdf(0), 0.375, 1e-16));
        let c2 = ind_max_cdf(&s, &o, 2).unwrap();
        assert!(close(c2.cdf(-2), 0.09033203125, 1e-16));
        assert_eq!(c2.cdf(2), 1.0);
        assert_eq!(c2.cdf(5), 1.0);
    }

    #[test]
    fn conditional_probabilities() {
        let (s, o) = (rademacher(), binary());
        let c = brw_max_cdf(&s, &o, 5).unwrap();
        for y in -5..=5 {
            assert_eq!(c.conditional_prob(Direction::AtMost, y).unwrap(), c.alive_at(y));
            assert!(close(c.conditional_prob(Direction::AtMost, y).unwrap(), c.cdf(y), 1e-15));
        }

        let d = with_deaths();
        let c1 = ind_max_cdf(&s, &d, 1).unwrap();
        assert!(close(c1.base, 0.25, 1e-16));
        assert_eq!(c1.conditional_prob(Direction::AtMost, -2).unwrap(), 0.0);
        assert!(close(c1.unconditional_prob(Direction::AtMost, -2), 0.25, 1e-16));
        assert!(close(c1.conditional_prob(Direction::AtMost, -1).unwrap(), 0.25, 1e-15));
        assert!(close(c1.conditional_prob(Direction::AtLeast, 1).unwrap(), 0.75, 1e-15));

        let dead = OffspringLaw::new(&[1.0]).unwrap();
        let c = brw_max_cdf(&s, &dead, 1).unwrap();
        assert!(c.conditional_prob(Direction::AtMost, 0).is_err());
    }

    #[test]
    fn maxima_share_the_extinction_mass() {
        let (s, d) = (rademacher(), with_deaths());
        for n in [1, 4, 9] {
            let brw = brw_max_cdf(&s, &d, n).unwrap();
            let ind = ind_max_cdf(&s, &d, n).unwrap();
            let pmf = gw_pmf(&d, n, 1 << 10).unwrap();
            assert!(close(brw.base, ind.base, 1e-15));
            assert!(close(brw.base, pmf.probs[0], 1e-15));
            for c in [&brw, &ind] {
                assert!(c.values.windows(2).all(|w| w[0] <= w[1] + 1e-15));
                assert!(close(*c.values.last().unwrap(), 1.0, 1e-12));
                for (i, (&v, &u)) in c.values.iter().zip(&c.upper).enumerate() {
                    assert!(close(v + u, 1.0, 1e-12), "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn rate_extraction() {
        let c = 0.37;
        let pts: Vec<(usize, f64)> = [10, 20, 40].iter().map(|&n| (n, -c * n as f64)).collect();
        assert!(close(finite_n_rate(&pts, RateMode::Slope).unwrap(), c, 1e-14));
        assert!(close(finite_n_rate(&pts, RateMode::Successive).unwrap(), c, 1e-14));

        let o = binary();
        let pts: Vec<(usize, f64)> = [25, 50, 100]
            .iter()
            .map(|&n| (n, gw_pmf(&o, n, 4).unwrap().probs[1].ln()))
            .collect();
        assert!(close(finite_n_rate(&pts, RateMode::Successive).unwrap(), 2f64.ln(), 1e-12));

        assert!(finite_n_rate(&[(5, f64::NEG_INFINITY), (10, -1.0)], RateMode::Slope).is_err());
        // prefactor n^{-3/2} cancels only approximately without a doubled pair
        let pts = [(30, -0.5 * 30.0 - 1.5 * 30f64.ln()), (45, -0.5 * 45.0 - 1.5 * 45f64.ln())];
        assert!(close(finite_n_rate(&pts, RateMode::Successive).unwrap(), 0.5 + 1.5 * (1.5f64).ln() / 15.0, 1e-12));
    }

    #[test]
    fn dominance_small() {
        let (s, o) = (rademacher(), binary());
        let report = check_dominance(&s, &o, 12).unwrap();
        assert!(report.passed());
        let p1 = report.profile[1];
        assert!(p1.gap.abs() <= 1e-12);

        // swapped roles must fail from n = 2 on
        let mut swapped = DominanceReport::empty(3, DOMINANCE_TOLERANCE);
        for n in 0..=3 {
            let brw = brw_max_cdf(&s, &o, n).unwrap();
            let ind = ind_max_cdf(&s, &o, n).unwrap();
            swapped.record(n, &ind, &brw);
        }
        assert!(!swapped.passed());
        assert!(swapped.violations.iter().all(|v| v.n >= 2));
        assert!(swapped.violations.iter().any(|v| v.n == 2 && v.y == -2));
    }

    #[test]
    fn reachable_sets() {
        let o = binary();
        assert_eq!(reachable_counts(&o, 1, 64).counts, vec![1, 2]);
        assert_eq!(reachable_counts(&o, 2, 64).counts, vec![1, 2, 3, 4]);
        let r = reachable_counts(&OffspringLaw::new(&[0.0, 0.0, 1.0]).unwrap(), 3, 64);
        assert_eq!(r.counts, vec![8]);
        assert!(!r.truncated);
        let r = reachable_counts(&OffspringLaw::new(&[0.0, 0.0, 1.0]).unwrap(), 3, 5);
        assert!(r.counts.is_empty() && r.truncated);
        let r = reachable_counts(&with_deaths(), 2, 64);
        assert_eq!(r.counts, vec![0, 2, 4]);
        assert_eq!(r.positive().collect::<Vec<_>>(), vec![2, 4]);
        let r = reachable_counts(&o, 4, 6);
        assert_eq!(r.counts, vec![1, 2, 3, 4, 5, 6]);
        assert!(r.truncated);
    }

    #[test]
    fn oversized_pmf_is_a_budget_error() {
        let law = OffspringLaw::new(&[0.0, 0.5, 0.5]).unwrap();
        let k = (0.2f64 * 200.0).exp() as usize;
        assert!(matches!(gw_pmf(&law, 200, k), Err(Error::Budget(_))));
    }

    #[test]
    fn gaussian_tail_closed_form() {
        let g = GaussianStep::new(0.0, 1.0).unwrap();
        assert!(close(gaussian_walk_tail(&g, 0.0, 10), 0.5, 1e-15));
        // P(N(0,1) >= 1.96) = 0.0249979
        let p = gaussian_walk_tail(&g, 1.96 / 10.0, 100);
        assert!(close(p, 0.024997895, 1e-8));
    }

    #[test]
    fn quantile_and_mean() {
        let c = rw_cdf(&rademacher(), 4).unwrap();
        assert_eq!(c.conditional_quantile(0.5).unwrap(), 0);
        assert!(c.conditional_mean().unwrap().abs() < 1e-15);
    }
}
